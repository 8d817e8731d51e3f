//! Dempster covariance selection by iterative proportional fitting.
//!
//! Finds the covariance `C` with `C_ij = S_ij` on every edge and on the
//! diagonal, and `(C^-1)_ij = 0` off the graph. The iteration is kept in
//! precision form: each edge (or isolated vertex) update replaces the
//! marginal on that pair by `S` while holding the conditional distribution
//! of the remaining coordinates fixed, which only touches the pair's block
//! of the precision matrix. Off-graph precision entries therefore stay
//! exactly zero throughout.

use nalgebra::{Cholesky, DMatrix, Matrix2};

use super::graph::CIGraph;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IpfConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IpfConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Completion {
    pub covariance: DMatrix<f64>,
    /// Sparse precision; zero off the graph.
    pub precision: DMatrix<f64>,
    pub sweeps: usize,
}

/// Completes `s` to the maximum-entropy covariance consistent with `graph`.
pub fn dempster_completion(s: &DMatrix<f64>, graph: &CIGraph, cfg: &IpfConfig) -> Result<DMatrix<f64>> {
    complete(s, graph, None, cfg).map(|c| c.covariance)
}

/// Like [`dempster_completion`], optionally starting from `start`, a
/// positive-definite precision with zeros off the graph.
pub fn complete(
    s: &DMatrix<f64>,
    graph: &CIGraph,
    start: Option<&DMatrix<f64>>,
    cfg: &IpfConfig,
) -> Result<Completion> {
    let d = s.nrows();
    if s.ncols() != d {
        return Err(Error::InvalidData("covariance must be square".into()));
    }
    if graph.vertex_count() != d {
        return Err(Error::mismatch(d, graph.vertex_count()));
    }
    if let Some(i) = (0..d).find(|&i| !(s[(i, i)] > 0.0)) {
        return Err(Error::InvalidData(format!("non-positive variance at coordinate {i}")));
    }

    if graph.is_empty() {
        let covariance = DMatrix::from_diagonal(&s.diagonal());
        let precision = DMatrix::from_diagonal(&s.diagonal().map(|v| 1.0 / v));
        return Ok(Completion {
            covariance,
            precision,
            sweeps: 0,
        });
    }
    if graph.is_complete() {
        let covariance = (s + s.transpose()) * 0.5;
        let precision = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::InvalidData("S is not positive definite".into()))?
            .inverse();
        return Ok(Completion {
            covariance,
            precision,
            sweeps: 0,
        });
    }

    let mut k = match start {
        Some(k0) if k0.shape() == (d, d) => k0.clone(),
        _ => DMatrix::from_diagonal(&s.diagonal().map(|v| 1.0 / v)),
    };
    let mut sigma = match Cholesky::new(k.clone()) {
        Some(c) => c.inverse(),
        None => {
            k = DMatrix::from_diagonal(&s.diagonal().map(|v| 1.0 / v));
            DMatrix::from_diagonal(&s.diagonal())
        }
    };

    let edges: Vec<(usize, usize)> = graph.edges().collect();
    let isolated: Vec<usize> = (0..d).filter(|&v| graph.degree(v) == 0).collect();

    let mut residual = fit_residual(s, &sigma, &edges);
    let mut sweeps = 0;
    while residual > cfg.tol && sweeps < cfg.max_iter {
        sweeps += 1;
        for &v in &isolated {
            update_vertex(s, &mut k, &mut sigma, v);
        }
        for &(i, j) in &edges {
            if !update_pair(s, &mut k, &mut sigma, i, j) {
                return Err(Error::InvalidData(format!(
                    "S restricted to edge ({i}, {j}) is not positive definite"
                )));
            }
        }
        residual = fit_residual(s, &sigma, &edges);
    }

    // Re-derive the covariance from the exactly sparse precision.
    let covariance = match Cholesky::new(k.clone()) {
        Some(c) => {
            let inv = c.inverse();
            (&inv + inv.transpose()) * 0.5
        }
        None => {
            return Err(Error::CompletionNotConverged {
                iterations: sweeps,
                residual,
                best: Box::new(sigma),
            })
        }
    };
    let residual = fit_residual(s, &covariance, &edges);
    if residual > cfg.tol {
        return Err(Error::CompletionNotConverged {
            iterations: sweeps,
            residual,
            best: Box::new(covariance),
        });
    }
    Ok(Completion {
        covariance,
        precision: k,
        sweeps,
    })
}

/// Largest mismatch `|C_ij - S_ij|` over edges and the diagonal.
fn fit_residual(s: &DMatrix<f64>, sigma: &DMatrix<f64>, edges: &[(usize, usize)]) -> f64 {
    let diag = (0..s.nrows())
        .map(|i| (sigma[(i, i)] - s[(i, i)]).abs())
        .fold(0.0, f64::max);
    edges
        .iter()
        .map(|&(i, j)| (sigma[(i, j)] - s[(i, j)]).abs())
        .fold(diag, f64::max)
}

fn update_vertex(s: &DMatrix<f64>, k: &mut DMatrix<f64>, sigma: &mut DMatrix<f64>, v: usize) {
    let cur = sigma[(v, v)];
    let target = s[(v, v)];
    k[(v, v)] += 1.0 / target - 1.0 / cur;
    // sigma += sigma[:, v] (target - cur) / cur^2 sigma[v, :]
    let col = sigma.column(v).clone_owned();
    let scale = (target - cur) / (cur * cur);
    sigma.ger(scale, &col, &col, 1.0);
}

/// Returns false when the 2x2 block of `s` or of the current estimate is
/// not positive definite.
fn update_pair(s: &DMatrix<f64>, k: &mut DMatrix<f64>, sigma: &mut DMatrix<f64>, i: usize, j: usize) -> bool {
    let target = Matrix2::new(s[(i, i)], s[(i, j)], s[(j, i)], s[(j, j)]);
    let cur = Matrix2::new(sigma[(i, i)], sigma[(i, j)], sigma[(j, i)], sigma[(j, j)]);
    let (Some(target_inv), Some(cur_inv)) = (inv_pd2(&target), inv_pd2(&cur)) else {
        return false;
    };
    let delta_k = target_inv - cur_inv;
    k[(i, i)] += delta_k[(0, 0)];
    k[(i, j)] += delta_k[(0, 1)];
    k[(j, i)] += delta_k[(1, 0)];
    k[(j, j)] += delta_k[(1, 1)];

    // sigma += sigma[:, C] cur^-1 (target - cur) cur^-1 sigma[C, :]
    let middle = cur_inv * (target - cur) * cur_inv;
    let middle = (middle + middle.transpose()) * 0.5;
    let d = sigma.nrows();
    let a = sigma.column(i).clone_owned();
    let b = sigma.column(j).clone_owned();
    for c in 0..d {
        let (ac, bc) = (a[c], b[c]);
        let left0 = middle[(0, 0)] * ac + middle[(1, 0)] * bc;
        let left1 = middle[(0, 1)] * ac + middle[(1, 1)] * bc;
        for r in 0..d {
            sigma[(r, c)] += a[r] * left0 + b[r] * left1;
        }
    }
    true
}

fn inv_pd2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(m[(0, 0)] > 0.0) || !(det > 0.0) {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}
