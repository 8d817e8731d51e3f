//! Newton's method for the same completion problem.
//!
//! The completion's precision `K` minimizes `-logdet K + tr(S K)` over
//! positive-definite `K` supported on the graph and the diagonal. That
//! problem is strictly convex with only `d + |E|` free parameters, so a
//! damped Newton iteration reaches the fixed point in a handful of steps,
//! while edge-wise fitting can need hundreds of sweeps on dense graphs.
//! Both stop on the same fit residual.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::completion::{Completion, IpfConfig};
use super::graph::CIGraph;

const MAX_STEPS: usize = 100;
const MAX_HALVINGS: usize = 40;
/// A stale Hessian is refreshed once a step shrinks the residual by less
/// than this factor.
const REFRESH_RATIO: f64 = 0.25;

/// Result of a Newton solve, with the factor of the final precision kept
/// for cheap density evaluation.
pub(crate) struct NewtonCompletion {
    pub completion: Completion,
    pub precision_factor: Cholesky<f64, Dyn>,
}

/// Factored Hessian carried between solves on the same graph. Consecutive
/// prefix covariances differ by a rank-one update, so an old factor still
/// gives a contracting step and only needs refreshing occasionally.
#[derive(Default)]
pub(crate) struct HessianCache {
    factor: Option<Cholesky<f64, Dyn>>,
}

/// Newton solve from `start` (or `diag(1 / S_ii)`). Returns `None` when it
/// fails to meet `cfg.tol`; the caller falls back to edge-wise fitting.
pub(crate) fn complete_newton(
    s: &DMatrix<f64>,
    graph: &CIGraph,
    start: Option<&DMatrix<f64>>,
    cache: &mut HessianCache,
    cfg: &IpfConfig,
) -> Option<NewtonCompletion> {
    let d = s.nrows();
    // Free parameters: the diagonal, then the edges.
    let params: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).chain(graph.edges()).collect();
    let p = params.len();
    if cache.factor.as_ref().is_some_and(|f| f.l_dirty().nrows() != p) {
        cache.factor = None;
    }
    // With these weights the Hessian is the plain form below.
    let weight = |(i, j): (usize, usize)| {
        if i == j {
            std::f64::consts::FRAC_1_SQRT_2
        } else {
            std::f64::consts::SQRT_2
        }
    };

    let diag_start = || DMatrix::from_diagonal(&s.diagonal().map(|v| 1.0 / v));
    let mut k = start.filter(|k0| k0.shape() == (d, d)).cloned().unwrap_or_else(diag_start);
    let mut chol = match Cholesky::new(k.clone()) {
        Some(c) => c,
        None => {
            k = diag_start();
            Cholesky::new(k.clone())?
        }
    };
    let mut value = objective(s, &k, &chol);
    let mut previous_residual = f64::INFINITY;
    let mut fresh = false;

    for _ in 0..MAX_STEPS {
        let sigma = chol.inverse();
        let residual = params
            .iter()
            .map(|&(i, j)| (sigma[(i, j)] - s[(i, j)]).abs())
            .fold(0.0, f64::max);
        if residual <= cfg.tol {
            let covariance = (&sigma + sigma.transpose()) * 0.5;
            return Some(NewtonCompletion {
                completion: Completion {
                    covariance,
                    precision: k,
                    sweeps: 0,
                },
                precision_factor: chol,
            });
        }
        if residual > REFRESH_RATIO * previous_residual {
            cache.factor = None;
        }
        previous_residual = residual;

        let grad = DVector::from_fn(p, |a, _| {
            let (i, j) = params[a];
            std::f64::consts::SQRT_2 * weight((i, j)) * (s[(i, j)] - sigma[(i, j)])
        });
        loop {
            if cache.factor.is_none() {
                let hess = DMatrix::from_fn(p, p, |a, b| {
                    let ((i, j), (u, v)) = (params[a], params[b]);
                    weight((i, j)) * weight((u, v)) * (sigma[(i, u)] * sigma[(j, v)] + sigma[(i, v)] * sigma[(j, u)])
                });
                cache.factor = Some(Cholesky::new(hess)?);
                fresh = true;
            }
            let step = cache.factor.as_ref().expect("factor just set").solve(&(-&grad));
            match line_search(s, &params, &k, &step, -grad.dot(&step), value) {
                Some((trial, c, f)) => {
                    k = trial;
                    chol = c;
                    value = f;
                    break;
                }
                None if fresh => return None,
                None => cache.factor = None,
            }
        }
        fresh = false;
    }
    None
}

/// Backtracking along `step`; returns the accepted precision, its factor
/// and objective value.
fn line_search(
    s: &DMatrix<f64>,
    params: &[(usize, usize)],
    k: &DMatrix<f64>,
    step: &DVector<f64>,
    decrement: f64,
    value: f64,
) -> Option<(DMatrix<f64>, Cholesky<f64, Dyn>, f64)> {
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        let mut trial = k.clone();
        for (a, &(i, j)) in params.iter().enumerate() {
            trial[(i, j)] += t * step[a];
            if i != j {
                trial[(j, i)] += t * step[a];
            }
        }
        if let Some(c) = Cholesky::new(trial.clone()) {
            let f = objective(s, &trial, &c);
            // Armijo condition. Inside the quadratic region the predicted
            // decrease is below roundoff in `f`, so any PD full step is taken.
            let quadratic_region = t == 1.0 && decrement < 1e-9 * (1.0 + value.abs());
            if quadratic_region || f <= value - 0.25 * t * decrement {
                return Some((trial, c, f));
            }
        }
        t *= 0.5;
    }
    None
}

fn objective(s: &DMatrix<f64>, k: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    s.component_mul(k).sum() - logdet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::completion::complete;

    fn random_pd(d: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(d, d + 3, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() / (d + 3) as f64 + DMatrix::identity(d, d) * 0.05
    }

    fn random_graph(d: usize, density: f64, seed: u64) -> CIGraph {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(density))
            .collect();
        CIGraph::from_edges(d, edges).unwrap()
    }

    #[test]
    fn agrees_with_edgewise_fitting() {
        let cfg = IpfConfig::default();
        for seed in 0..20 {
            let s = random_pd(8, seed);
            let g = random_graph(8, 0.4, seed + 100);
            let newton = complete_newton(&s, &g, None, &mut HessianCache::default(), &cfg).expect("newton converges");
            let ipf = complete(&s, &g, None, &cfg).unwrap();
            assert!((&newton.completion.covariance - &ipf.covariance).amax() < 1e-6);
            for i in 0..8 {
                for j in 0..8 {
                    if i != j && !g.has_edge(i.min(j), i.max(j)) {
                        assert_eq!(newton.completion.precision[(i, j)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn warm_start_at_solution_takes_no_step() {
        let cfg = IpfConfig::default();
        let s = random_pd(6, 3);
        let g = random_graph(6, 0.5, 4);
        let first = complete_newton(&s, &g, None, &mut HessianCache::default(), &cfg).unwrap().completion;
        let again = complete_newton(&s, &g, Some(&first.precision), &mut HessianCache::default(), &cfg).unwrap().completion;
        assert_eq!(again.precision, first.precision);
    }
}
