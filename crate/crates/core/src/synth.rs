//! Random sparse Gaussian graphical models for synthetic experiments.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::GaussianModel;
use crate::select::CIGraph;

const MAX_ATTEMPTS: usize = 1000;

/// A random graph with `round(density * d(d-1)/2)` edges and precision
/// entries `-pcor` on the edges over a unit diagonal, so each edge carries
/// partial correlation `pcor`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GgmSpec {
    pub dim: usize,
    pub density: f64,
    pub pcor: f64,
}

impl GgmSpec {
    pub fn edge_count(&self) -> usize {
        let max = self.dim * self.dim.saturating_sub(1) / 2;
        (self.density * max as f64).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidModel(format!("density must lie in [0, 1], got {}", self.density)));
        }
        if !(self.pcor.abs() < 1.0) {
            return Err(Error::InvalidModel(format!("partial correlation must lie in (-1, 1), got {}", self.pcor)));
        }
        Ok(())
    }
}

/// Draws graphs until the resulting precision is positive definite, then
/// rescales the covariance to unit variances. Rescaling keeps the
/// precision support and the partial correlations.
pub fn random_sparse_ggm(spec: &GgmSpec, seed: u64) -> Result<(GaussianModel, CIGraph)> {
    spec.validate()?;
    let d = spec.dim;
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let graph = CIGraph::from_edges(d, sample(&mut rng, pairs.len(), spec.edge_count()).iter().map(|k| pairs[k]))?;
        let mut omega = DMatrix::identity(d, d);
        for (i, j) in graph.edges() {
            omega[(i, j)] = -spec.pcor;
            omega[(j, i)] = -spec.pcor;
        }
        if min_eigenvalue(&omega) > 1e-6 {
            return Ok((model_from_precision(&omega)?, graph));
        }
    }
    Err(Error::InvalidModel(format!(
        "no positive definite precision found in {MAX_ATTEMPTS} draws for {spec:?}"
    )))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Zero-mean correlation-scaled model whose precision has the support of `omega`.
pub fn model_from_precision(omega: &DMatrix<f64>) -> Result<GaussianModel> {
    if !omega.is_square() {
        return Err(Error::InvalidModel(format!(
            "precision must be square, got {}x{}",
            omega.nrows(),
            omega.ncols()
        )));
    }
    let cov = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("precision matrix is not positive definite".into()))?
        .inverse();
    let scale = cov.diagonal().map(|v| 1.0 / v.sqrt());
    let d = omega.nrows();
    let corr = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] * scale[i] * scale[j]
        }
    });
    let corr = (&corr + corr.transpose()) * 0.5;
    GaussianModel::new(DVector::zeros(d), corr)
}
