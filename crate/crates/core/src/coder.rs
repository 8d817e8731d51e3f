//! The two competing codelengths of a test batch.
//!
//! `L1` codes the latents with the Gaussian fitted at training time and the
//! residual entries with the pooled scalar Gaussian from training. `L2`
//! codes the latents with the universal graphical-model coder (graph bits
//! plus predictive data bits) and the residual entries with a sequential
//! plug-in scalar coder.

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_codelength, order_free_sum, DataBatch, GaussianModel, ScalarGaussian};
use crate::select::{select_model, SelectionConfig};

const VARIANCE_FLOOR: f64 = 1e-12;

/// Frozen training-phase statistics.
#[derive(Clone, Debug)]
pub struct TrainedDetector {
    latent_model: GaussianModel,
    residual: ScalarGaussian,
    data_dim: usize,
    lambda_star: f64,
}

impl TrainedDetector {
    pub fn new(latent_model: GaussianModel, residual: ScalarGaussian, data_dim: usize, lambda_star: f64) -> Result<Self> {
        if latent_model.dim() > data_dim {
            return Err(Error::InvalidModel(format!(
                "latent dimension {} exceeds data dimension {}",
                latent_model.dim(),
                data_dim
            )));
        }
        if latent_model.mean().iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidModel("latent model must have zero mean".into()));
        }
        Ok(Self {
            latent_model,
            residual,
            data_dim,
            lambda_star,
        })
    }

    pub fn latent_model(&self) -> &GaussianModel {
        &self.latent_model
    }

    pub fn residual(&self) -> ScalarGaussian {
        self.residual
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_model.dim()
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }
}

#[derive(Clone, Debug)]
pub struct CoderConfig {
    pub selection: SelectionConfig,
    /// Model for the first residual values of the plug-in scalar coder.
    pub scalar_default: ScalarGaussian,
}

impl Default for CoderConfig {
    fn default() -> Self {
        Self {
            selection: SelectionConfig::default(),
            scalar_default: ScalarGaussian::standard(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainedBits {
    pub latent: f64,
    pub residual: f64,
}

impl TrainedBits {
    pub fn total(&self) -> f64 {
        self.latent + self.residual
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniversalBits {
    pub latent_graph: f64,
    pub latent_data: f64,
    pub residual: f64,
    pub lambda_star: f64,
    pub edge_count: usize,
}

impl UniversalBits {
    pub fn total(&self) -> f64 {
        self.latent_graph + self.latent_data + self.residual
    }
}

/// L1, L2 and their parts for one batch. `score = L2 - L1`; lower is more
/// out-of-distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodelengthReport {
    pub l1_bits: f64,
    pub l2_bits: f64,
    pub l1_latent: f64,
    pub l1_residual: f64,
    pub l2_latent_graph: f64,
    pub l2_latent_data: f64,
    pub l2_residual: f64,
    pub score: f64,
    pub lambda_star: f64,
    pub edge_count: usize,
}

impl CodelengthReport {
    pub fn new(trained: TrainedBits, universal: UniversalBits) -> Self {
        let l1_bits = trained.total();
        let l2_bits = universal.total();
        Self {
            l1_bits,
            l2_bits,
            l1_latent: trained.latent,
            l1_residual: trained.residual,
            l2_latent_graph: universal.latent_graph,
            l2_latent_data: universal.latent_data,
            l2_residual: universal.residual,
            score: l2_bits - l1_bits,
            lambda_star: universal.lambda_star,
            edge_count: universal.edge_count,
        }
    }

    /// `-score`, for consumers that expect higher to mean more anomalous.
    pub fn ood_score(&self) -> f64 {
        -self.score
    }
}

fn check_pair(latents: &DataBatch, residuals: &DataBatch, latent_dim: usize, data_dim: usize) -> Result<()> {
    if latents.dim() != latent_dim {
        return Err(Error::mismatch(latent_dim, latents.dim()));
    }
    if residuals.dim() != data_dim {
        return Err(Error::mismatch(data_dim, residuals.dim()));
    }
    if residuals.rows() != latents.rows() {
        return Err(Error::mismatch(latents.rows(), residuals.rows()));
    }
    Ok(())
}

/// Residual bits under the pooled iid scalar model.
pub fn residual_codelength(residuals: &DataBatch, model: ScalarGaussian) -> Result<f64> {
    if !(model.var > 0.0) {
        return Err(Error::InvalidModel(format!("residual variance must be positive, got {}", model.var)));
    }
    Ok(order_free_sum(residuals.iter_row_major().map(|r| model.codelength(r)).collect()))
}

/// `L1`: latents under the trained Gaussian, residuals under the trained
/// scalar model.
pub fn trained_codelength(latents: &DataBatch, residuals: &DataBatch, det: &TrainedDetector) -> Result<TrainedBits> {
    check_pair(latents, residuals, det.latent_dim(), det.data_dim())?;
    Ok(TrainedBits {
        latent: gaussian_codelength(latents, det.latent_model())?,
        residual: residual_codelength(residuals, det.residual())?,
    })
}

/// `L2` for the latent part only.
pub fn universal_latent_codelength(
    latents: &DataBatch,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<UniversalBits> {
    let sel = select_model(latents, lambda_grid, &cfg.selection)?;
    Ok(UniversalBits {
        latent_graph: sel.graph_bits,
        latent_data: sel.data_bits,
        residual: 0.0,
        lambda_star: sel.lambda_star,
        edge_count: sel.graph.edge_count(),
    })
}

/// `L2`: universal graphical-model coder on the latents plus the plug-in
/// scalar coder on the flattened residuals.
pub fn universal_codelength(
    latents: &DataBatch,
    residuals: &DataBatch,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<UniversalBits> {
    check_pair(latents, residuals, latents.dim(), residuals.dim())?;
    let mut bits = universal_latent_codelength(latents, lambda_grid, cfg)?;
    let flat: Vec<f64> = residuals.iter_row_major().collect();
    bits.residual = scalar_universal_codelength(&flat, cfg.scalar_default)?;
    Ok(bits)
}

/// Sequential plug-in code for a real sequence.
///
/// Value `t + 1` is coded under `N(mean_t, var_t)`, the ML estimates from
/// the first `t` values. The first two values, and any value whose prefix
/// variance is below `1e-12`, are coded under `default`.
pub fn scalar_universal_codelength(values: &[f64], default: ScalarGaussian) -> Result<f64> {
    Ok(scalar_universal_terms(values, default)?.iter().sum())
}

pub fn scalar_universal_terms(values: &[f64], default: ScalarGaussian) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidData("scalar coder needs at least one value".into()));
    }
    let mut terms = Vec::with_capacity(values.len());
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (t, &v) in values.iter().enumerate() {
        let var = if t > 0 { m2 / t as f64 } else { 0.0 };
        let bits = if t < 2 || var < VARIANCE_FLOOR {
            default.codelength(v)
        } else {
            ScalarGaussian { mean, var }.codelength(v)
        };
        terms.push(bits);
        // Welford update.
        let n = (t + 1) as f64;
        let delta = v - mean;
        mean += delta / n;
        m2 += delta * (v - mean);
    }
    Ok(terms)
}
