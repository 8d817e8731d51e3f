use mdlood_core::coder::{scalar_universal_terms, trained_codelength};
use mdlood_core::glasso::GlassoConfig;
use mdlood_core::select::graph_codelength;
use mdlood_core::{
    empirical_covariance, gaussian_codelength, graphical_lasso, sample_gaussian, CIGraph, DataBatch, Decision,
    GaussianModel, ScalarGaussian, TrainedDetector,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn batch_strategy(max_rows: usize, dim: usize) -> impl Strategy<Value = DataBatch> {
    (1..=max_rows).prop_flat_map(move |rows| {
        prop::collection::vec(-5.0f64..5.0, rows * dim)
            .prop_map(move |v| DataBatch::new(DMatrix::from_row_slice(rows, dim, &v)).unwrap())
    })
}

fn shuffled_rows(batch: &DataBatch, seed: u64) -> DataBatch {
    let mut idx: Vec<usize> = (0..batch.rows()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    batch.select_rows(&idx).unwrap()
}

fn model3() -> GaussianModel {
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.2, 0.3, 1.0, 0.4, -0.2, 0.4, 1.5]);
    GaussianModel::new(DVector::from_vec(vec![0.5, -1.0, 0.0]), cov).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codelength_is_additive_over_concatenation(a in batch_strategy(12, 3), b in batch_strategy(12, 3)) {
        let m = model3();
        let joint = gaussian_codelength(&a.concat(&b).unwrap(), &m).unwrap();
        let split = gaussian_codelength(&a, &m).unwrap() + gaussian_codelength(&b, &m).unwrap();
        prop_assert!((joint - split).abs() <= 1e-9 * joint.abs().max(1.0));
    }

    #[test]
    fn empirical_covariance_is_symmetric_psd(b in batch_strategy(15, 4), zero_mean in any::<bool>()) {
        prop_assume!(zero_mean || b.rows() >= 2);
        let s = empirical_covariance(&b, zero_mean).unwrap();
        prop_assert_eq!(&s, &s.transpose());
        let min = SymmetricEigen::new(s).eigenvalues.min();
        prop_assert!(min >= -1e-10, "min eigenvalue {}", min);
    }

    #[test]
    fn trained_bits_ignore_row_order(l in batch_strategy(20, 3), seed in any::<u64>()) {
        let det = TrainedDetector::new(GaussianModel::zero_mean(model3().covariance().clone()).unwrap(), ScalarGaussian::new(0.1, 0.7).unwrap(), 5, 0.5).unwrap();
        let r = sample_gaussian(&GaussianModel::standard(5).unwrap(), l.rows(), seed).unwrap();
        let mut idx: Vec<usize> = (0..l.rows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let before = trained_codelength(&l, &r, &det).unwrap();
        let after = trained_codelength(&l.select_rows(&idx).unwrap(), &r.select_rows(&idx).unwrap(), &det).unwrap();
        prop_assert_eq!(before.latent.to_bits(), after.latent.to_bits());
        prop_assert_eq!(before.residual.to_bits(), after.residual.to_bits());
    }

    #[test]
    fn scalar_coder_is_scale_equivariant(
        values in prop::collection::vec(-3.0f64..3.0, 3..60),
        a in 0.25f64..8.0,
        b in -5.0f64..5.0,
    ) {
        let default = ScalarGaussian::new(0.2, 1.3).unwrap();
        let mapped_default = ScalarGaussian::new(a * default.mean + b, a * a * default.var).unwrap();
        let mapped: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let base = scalar_universal_terms(&values, default).unwrap();
        let moved = scalar_universal_terms(&mapped, mapped_default).unwrap();
        // Tiny prefix variances are coded under the default and fall outside the claim.
        let mut var_ok = vec![false; values.len()];
        for t in 2..values.len() {
            let prefix = &values[..t];
            let mean = prefix.iter().sum::<f64>() / t as f64;
            let var = prefix.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
            var_ok[t] = var > 1e-6 && a * a * var > 1e-6;
        }
        for t in 0..values.len() {
            if t < 2 || var_ok[t] {
                let shift = moved[t] - base[t];
                prop_assert!((shift - a.log2()).abs() <= 1e-8 * base[t].abs().max(1.0), "term {}: {} vs {}", t, shift, a.log2());
            }
        }
    }

    #[test]
    fn decision_is_monotone_in_tau(score in -1e4f64..1e4, mut taus in prop::collection::vec(-1e4f64..1e4, 2..20)) {
        taus.sort_by(f64::total_cmp);
        let flags: Vec<bool> = taus.iter().map(|&t| Decision::new(score, t).is_ood).collect();
        prop_assert!(flags.windows(2).all(|w| w[0] >= w[1]), "{:?}", flags);
    }

    #[test]
    fn graph_bits_ignore_vertex_labels(d in 2usize..12, mask in any::<u64>(), seed in any::<u64>()) {
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        let edges: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|(k, _)| mask >> (k % 64) & 1 == 1).map(|(_, &e)| e).collect();
        let g = CIGraph::from_edges(d, edges).unwrap();
        let mut perm: Vec<usize> = (0..d).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let h = g.permuted(&perm).unwrap();
        prop_assert_eq!(h.edge_count(), g.edge_count());
        prop_assert_eq!(graph_codelength(&g).to_bits(), graph_codelength(&h).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn glasso_ignores_row_order_of_the_data(seed in any::<u64>(), lambda in 0.05f64..0.6) {
        let b = sample_gaussian(&GaussianModel::standard(6).unwrap(), 40, seed).unwrap();
        let cfg = GlassoConfig::default();
        let s1 = empirical_covariance(&b, true).unwrap();
        let s2 = empirical_covariance(&shuffled_rows(&b, seed ^ 1), true).unwrap();
        let a = graphical_lasso(&s1, lambda, &cfg).unwrap();
        let c = graphical_lasso(&s2, lambda, &cfg).unwrap();
        prop_assert!(a.converged && c.converged);
        let diff = (&a.precision - &c.precision).amax();
        prop_assert!(diff <= 1e-6, "max diff {}", diff);
    }
}
