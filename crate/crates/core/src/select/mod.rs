//! Two-part MDL model selection over the graphical-lasso path.
//!
//! For every penalty on the grid the graphical lasso yields a graph; the
//! graph is charged its description length under a [`GraphCoder`] and the
//! data is charged its predictive codelength under the Dempster completion
//! for that graph. The penalty minimizing the sum wins.

mod coders;
mod completion;
mod graph;
mod newton;
mod predictive;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use coders::{graph_codelength, AdjacencyCoder, EdgeCountCoder, GraphCoder, GraphCoderRegistry};
pub use completion::{complete, dempster_completion, Completion, IpfConfig};
pub use graph::{graph_from_precision, CIGraph};
pub use predictive::{default_warmup, predictive_mdl_codelength, PredictiveCodelength};
use predictive::PrefixCovariances;

use crate::error::{Error, Result};
use crate::gaussian::{empirical_covariance, DataBatch, GaussianModel};
use crate::glasso::{graphical_lasso, GlassoConfig};

#[derive(Clone, Debug)]
pub struct SelectionConfig {
    pub glasso: GlassoConfig,
    pub ipf: IpfConfig,
    /// Samples coded under the default model; `None` means `d + 1`.
    pub warmup: Option<usize>,
    /// Model for the warmup samples; `None` means `N(0, I)`.
    pub default_model: Option<GaussianModel>,
    pub graph_coder: Arc<dyn GraphCoder>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            glasso: GlassoConfig::default(),
            ipf: IpfConfig::default(),
            warmup: None,
            default_model: None,
            graph_coder: Arc::new(EdgeCountCoder),
        }
    }
}

impl SelectionConfig {
    pub fn with_graph_coder(mut self, coder: Arc<dyn GraphCoder>) -> Self {
        self.graph_coder = coder;
        self
    }

    fn default_model_for(&self, d: usize) -> Result<GaussianModel> {
        match &self.default_model {
            Some(m) if m.dim() == d => Ok(m.clone()),
            Some(m) => Err(Error::mismatch(d, m.dim())),
            None => GaussianModel::standard(d),
        }
    }
}

/// `count` values log-spaced from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::InvalidData(format!(
            "log grid needs 0 < lo <= hi and count >= 1, got {lo}, {hi}, {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == count - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// The default penalty grid: 20 log-spaced values in `[0.1, 1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(0.1, 1.0, 20).expect("static grid is valid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaEvaluation {
    pub lambda: f64,
    pub edge_count: usize,
    pub graph_bits: f64,
    pub data_bits: f64,
    pub converged: bool,
}

impl LambdaEvaluation {
    pub fn total_bits(&self) -> f64 {
        self.graph_bits + self.data_bits
    }
}

#[derive(Clone, Debug)]
pub struct ModelSelectionResult {
    pub lambda_star: f64,
    pub graph: CIGraph,
    pub completed_covariance: DMatrix<f64>,
    pub graph_bits: f64,
    pub data_bits: f64,
    /// One row per distinct grid value, ascending in lambda. Rows whose
    /// glasso solve did not converge carry infinite bits.
    pub per_lambda_table: Vec<LambdaEvaluation>,
}

impl ModelSelectionResult {
    pub fn total_bits(&self) -> f64 {
        self.graph_bits + self.data_bits
    }
}

/// Minimizes `L(G_lambda) + L(x | G_lambda)` over the grid.
///
/// The zero-mean empirical covariance of `batch` feeds the graphical lasso.
/// Ties go to the larger penalty.
pub fn select_model(batch: &DataBatch, lambda_grid: &[f64], cfg: &SelectionConfig) -> Result<ModelSelectionResult> {
    if lambda_grid.is_empty() {
        return Err(Error::Selection("empty lambda grid".into()));
    }
    if batch.rows() < 2 {
        return Err(Error::Selection("model selection needs at least two samples".into()));
    }
    if let Some(bad) = lambda_grid.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::Selection(format!("invalid penalty {bad}")));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let d = batch.dim();
    let s = empirical_covariance(batch, true)?;
    // A coordinate with zero second moment has no penalty path; only the
    // independence graph is a candidate and every prefix codes under the
    // default model.
    let degenerate = (0..d).any(|j| !(s[(j, j)] > 0.0));
    let default_model = cfg.default_model_for(d)?;
    let warmup = cfg.warmup.unwrap_or_else(|| default_warmup(d));

    let solves: Vec<(f64, Option<CIGraph>)> = grid
        .par_iter()
        .map(|&lambda| {
            if degenerate {
                return Ok((lambda, Some(CIGraph::empty(d))));
            }
            let sol = graphical_lasso(&s, lambda, &cfg.glasso)?;
            let graph = sol
                .converged
                .then(|| graph_from_precision(&sol.precision, cfg.glasso.zero_threshold));
            Ok((lambda, graph))
        })
        .collect::<Result<_>>()?;

    let mut distinct: Vec<CIGraph> = solves.iter().filter_map(|(_, g)| g.clone()).collect();
    distinct.sort();
    distinct.dedup();
    if distinct.is_empty() {
        return Err(Error::Selection("glasso did not converge at any grid point".into()));
    }
    let prefixes = PrefixCovariances::new(batch, &default_model, warmup)?;
    let data_bits: HashMap<CIGraph, f64> = distinct
        .into_par_iter()
        .map(|g| {
            let bits = prefixes.code(&g, &cfg.ipf)?.total_bits;
            Ok((g, bits))
        })
        .collect::<Result<_>>()?;

    let mut table: Vec<LambdaEvaluation> = Vec::with_capacity(solves.len());
    let mut best: Option<(usize, &CIGraph)> = None;
    for (lambda, graph) in &solves {
        let row = match graph {
            Some(g) => LambdaEvaluation {
                lambda: *lambda,
                edge_count: g.edge_count(),
                graph_bits: cfg.graph_coder.codelength(g),
                data_bits: data_bits[g],
                converged: true,
            },
            None => LambdaEvaluation {
                lambda: *lambda,
                edge_count: 0,
                graph_bits: f64::INFINITY,
                data_bits: f64::INFINITY,
                converged: false,
            },
        };
        if let Some(g) = graph {
            // Ascending grid: `<=` hands ties to the larger penalty.
            let better = match best {
                None => true,
                Some((b, _)) => row.total_bits() <= table[b].total_bits(),
            };
            if better {
                best = Some((table.len(), g));
            }
        }
        table.push(row);
    }
    let (idx, graph) = best.expect("at least one converged grid point");
    let completed_covariance = if degenerate {
        DMatrix::from_diagonal(&s.diagonal())
    } else {
        dempster_completion(&s, graph, &cfg.ipf)?
    };
    let chosen: &LambdaEvaluation = &table[idx];
    Ok(ModelSelectionResult {
        lambda_star: chosen.lambda,
        graph: graph.clone(),
        completed_covariance,
        graph_bits: chosen.graph_bits,
        data_bits: chosen.data_bits,
        per_lambda_table: table,
    })
}
