//! Predictive (plug-in) MDL codelength of a batch given a graph.
//!
//! Sample `t + 1` is coded under `N(0, C_t)` where `C_t` is the Dempster
//! completion of the zero-mean empirical covariance of samples `1..=t`.
//! Samples inside the warmup window, and samples whose prefix covariance is
//! not positive definite, are coded under a fixed default model. Rows are
//! coded in the order given.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::completion::{complete, IpfConfig};
use super::graph::CIGraph;
use super::newton::{complete_newton, HessianCache};
use crate::error::{Error, Result};
use crate::gaussian::{DataBatch, GaussianModel, LOG2_2PI};

#[derive(Clone, Debug)]
pub struct PredictiveCodelength {
    pub total_bits: f64,
    pub per_sample: Vec<f64>,
    /// Number of samples coded under the default model.
    pub default_coded: usize,
}

/// Default warmup: `d + 1` samples, the fewest for a PD prefix covariance
/// plus one.
pub fn default_warmup(dim: usize) -> usize {
    dim + 1
}

pub fn predictive_mdl_codelength(
    batch: &DataBatch,
    graph: &CIGraph,
    default_model: &GaussianModel,
    warmup: usize,
    ipf: &IpfConfig,
) -> Result<PredictiveCodelength> {
    let prefixes = PrefixCovariances::new(batch, default_model, warmup)?;
    prefixes.code(graph, ipf)
}

/// The graph-independent part of predictive coding: prefix covariances
/// after the warmup that pass the PD check, and default-model bits for
/// every sample. Shared across all graphs coding the same batch.
pub(crate) struct PrefixCovariances<'a> {
    batch: &'a DataBatch,
    prefix: Vec<Option<DMatrix<f64>>>,
    default_bits: Vec<f64>,
}

impl<'a> PrefixCovariances<'a> {
    pub(crate) fn new(batch: &'a DataBatch, default_model: &GaussianModel, warmup: usize) -> Result<Self> {
        let d = batch.dim();
        if default_model.dim() != d {
            return Err(Error::mismatch(d, default_model.dim()));
        }
        if warmup == 0 {
            return Err(Error::InvalidData("warmup must be at least 1".into()));
        }
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        let mut prefix = Vec::with_capacity(batch.rows());
        let mut default_bits = Vec::with_capacity(batch.rows());
        for i in 0..batch.rows() {
            let x = batch.sample(i);
            prefix.push(if i < warmup {
                None
            } else {
                let s = &scatter / i as f64;
                let s = (&s + s.transpose()) * 0.5;
                // Reject prefixes whose empirical covariance is not PD.
                GaussianModel::zero_mean(s.clone()).ok().map(|_| s)
            });
            default_bits.push(default_model.sample_codelength(&x));
            scatter.ger(1.0, &x, &x, 1.0);
        }
        Ok(Self {
            batch,
            prefix,
            default_bits,
        })
    }

    pub(crate) fn code(&self, graph: &CIGraph, ipf: &IpfConfig) -> Result<PredictiveCodelength> {
        let d = self.batch.dim();
        if graph.vertex_count() != d {
            return Err(Error::mismatch(graph.vertex_count(), d));
        }
        let mut per_sample = Vec::with_capacity(self.batch.rows());
        let mut default_coded = 0;
        let mut warm: Option<DMatrix<f64>> = None;
        let mut cache = HessianCache::default();
        for (i, s) in self.prefix.iter().enumerate() {
            let fitted = s
                .as_ref()
                .and_then(|s| prefix_precision(s, graph, warm.as_ref(), &mut cache, ipf));
            let bits = match fitted {
                Some((precision, factor)) => {
                    let bits = precision_codelength(&self.batch.sample(i), &factor);
                    warm = Some(precision);
                    bits
                }
                None => {
                    default_coded += 1;
                    self.default_bits[i]
                }
            };
            per_sample.push(bits);
        }
        Ok(PredictiveCodelength {
            total_bits: per_sample.iter().sum(),
            per_sample,
            default_coded,
        })
    }
}

/// Completed precision for one prefix and its Cholesky factor. Newton is
/// tried first; edge-wise fitting is the fallback, and when that also runs
/// out of sweeps its best iterate is used.
fn prefix_precision(
    s: &DMatrix<f64>,
    graph: &CIGraph,
    warm: Option<&DMatrix<f64>>,
    cache: &mut HessianCache,
    ipf: &IpfConfig,
) -> Option<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    if let Some(n) = complete_newton(s, graph, warm, cache, ipf) {
        return Some((n.completion.precision, n.precision_factor));
    }
    let precision = match complete(s, graph, warm, ipf) {
        Ok(c) => c.precision,
        Err(Error::CompletionNotConverged { best, .. }) => {
            GaussianModel::zero_mean(*best).ok()?.precision().clone()
        }
        Err(_) => return None,
    };
    let factor = Cholesky::new(precision.clone())?;
    Some((precision, factor))
}

/// `-log2 phi(x; 0, K^-1)` from the Cholesky factor of `K`.
fn precision_codelength(x: &DVector<f64>, factor: &Cholesky<f64, Dyn>) -> f64 {
    let l = factor.l_dirty();
    let log2_det_k = 2.0 * l.diagonal().iter().map(|v| v.log2()).sum::<f64>();
    // x^T K x = |L^T x|^2, reading only the lower triangle of the factor.
    let n = x.len();
    let quad: f64 = (0..n)
        .map(|j| (j..n).map(|i| l[(i, j)] * x[i]).sum::<f64>().powi(2))
        .sum();
    0.5 * (n as f64 * LOG2_2PI - log2_det_k + quad / std::f64::consts::LN_2)
}
