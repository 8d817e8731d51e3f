use mdlood_core::coder::trained_codelength;
use mdlood_core::select::{default_warmup, predictive_mdl_codelength, IpfConfig};
use mdlood_core::synth::{random_sparse_ggm, GgmSpec};
use mdlood_core::{
    default_lambda_grid, gaussian_codelength, sample_gaussian, select_model, train, CIGraph, CoderConfig,
    GaussianModel, SelectionConfig,
};
use nalgebra::DMatrix;

#[test]
fn iid_training_recovers_identity_covariance() {
    let latents = sample_gaussian(&GaussianModel::standard(5).unwrap(), 5000, 1).unwrap();
    let residuals = sample_gaussian(&GaussianModel::standard(8).unwrap(), 5000, 2).unwrap();
    let det = train(&latents, &residuals, &default_lambda_grid(), &CoderConfig::default()).unwrap();
    let err = (det.latent_model().covariance() - DMatrix::identity(5, 5)).amax();
    assert!(err < 0.1, "max-abs error {err}");
    assert!((det.residual().var - 1.0).abs() < 0.05);
}

#[test]
fn iid_selection_is_near_empty() {
    let batch = sample_gaussian(&GaussianModel::standard(10).unwrap(), 500, 3).unwrap();
    let sel = select_model(&batch, &default_lambda_grid(), &SelectionConfig::default()).unwrap();
    assert!(sel.graph.edge_count() <= 2, "{} edges", sel.graph.edge_count());
}

#[test]
fn split_halves_give_stable_detectors() {
    let model = random_sparse_ggm(&GgmSpec { dim: 6, density: 0.3, pcor: 0.4 }, 2).unwrap().0;
    let latents = sample_gaussian(&model, 4000, 4).unwrap();
    let residuals = sample_gaussian(&GaussianModel::standard(9).unwrap(), 4000, 5).unwrap();
    let first: Vec<usize> = (0..2000).collect();
    let second: Vec<usize> = (2000..4000).collect();
    let grid = default_lambda_grid();
    let cfg = CoderConfig::default();
    let a = train(&latents.select_rows(&first).unwrap(), &residuals.select_rows(&first).unwrap(), &grid, &cfg).unwrap();
    let b = train(&latents.select_rows(&second).unwrap(), &residuals.select_rows(&second).unwrap(), &grid, &cfg).unwrap();

    let test_l = sample_gaussian(&model, 100, 6).unwrap();
    let test_r = sample_gaussian(&GaussianModel::standard(9).unwrap(), 100, 7).unwrap();
    let la = trained_codelength(&test_l, &test_r, &a).unwrap().total();
    let lb = trained_codelength(&test_l, &test_r, &b).unwrap().total();
    assert!((la - lb).abs() < 0.01 * la.abs(), "{la} vs {lb}");
}

#[test]
fn universal_coding_has_nonnegative_redundancy() {
    let model = GaussianModel::standard(3).unwrap();
    let batch = sample_gaussian(&model, 2000, 8).unwrap();
    let universal = predictive_mdl_codelength(&batch, &CIGraph::complete(3), &model, default_warmup(3), &IpfConfig::default())
        .unwrap();
    let known = mdlood_core::gaussian::per_sample_codelengths(&batch, &model).unwrap();
    let m = known.len() as f64;
    let mean = known.iter().sum::<f64>() / m;
    let sd = (known.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let se_total = sd * m.sqrt();
    let total = gaussian_codelength(&batch, &model).unwrap();
    assert!(universal.total_bits >= total - 3.0 * se_total, "{} vs {total}", universal.total_bits);
}
