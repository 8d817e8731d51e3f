//! Training-phase statistics and the codelength hypothesis test.
//!
//! A batch is declared out-of-distribution when `L2 + tau < L1`, i.e. when
//! it codes in fewer bits under its own best graphical model (model cost
//! included) than under the coder fitted to the training data.

use crate::coder::{
    residual_codelength, scalar_universal_codelength, universal_latent_codelength, CodelengthReport, CoderConfig,
    TrainedBits, TrainedDetector,
};
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_codelength, DataBatch, GaussianModel, ScalarGaussian};
use crate::select::{graph_from_precision, select_model, CIGraph};

const RESIDUAL_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub score: f64,
    pub tau: f64,
    pub is_ood: bool,
}

impl Decision {
    pub fn new(score: f64, tau: f64) -> Self {
        Self {
            score,
            tau,
            is_ood: score < -tau,
        }
    }
}

impl CodelengthReport {
    pub fn decision_at(&self, tau: f64) -> Decision {
        Decision::new(self.score, tau)
    }
}

impl TrainedDetector {
    /// Support of the latent precision matrix.
    pub fn latent_graph(&self) -> CIGraph {
        graph_from_precision(self.latent_model().precision(), 1e-8)
    }
}

/// Fits the frozen statistics: the latent covariance by MDL graph
/// selection and Dempster completion, and the pooled residual mean and
/// variance (ML) over every residual entry.
pub fn train(
    latents: &DataBatch,
    residuals: &DataBatch,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<TrainedDetector> {
    let m = latents.dim();
    if latents.rows() < m + 2 {
        return Err(Error::InvalidData(format!(
            "training needs at least {} latent rows for dimension {}, got {}",
            m + 2,
            m,
            latents.rows()
        )));
    }
    if residuals.rows() != latents.rows() {
        return Err(Error::mismatch(latents.rows(), residuals.rows()));
    }
    if residuals.dim() < m {
        return Err(Error::InvalidData(format!(
            "residual dimension {} is below latent dimension {}",
            residuals.dim(),
            m
        )));
    }

    let residual = pooled_residual_model(residuals)?;
    let selection = select_model(latents, lambda_grid, &cfg.selection)?;
    let latent_model = GaussianModel::zero_mean(selection.completed_covariance)
        .map_err(|e| Error::Degenerate(format!("training latent covariance: {e}")))?;
    TrainedDetector::new(latent_model, residual, residuals.dim(), selection.lambda_star)
}

fn pooled_residual_model(residuals: &DataBatch) -> Result<ScalarGaussian> {
    let n = (residuals.rows() * residuals.dim()) as f64;
    let mean = residuals.iter_row_major().sum::<f64>() / n;
    let var = residuals.iter_row_major().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    if !(var >= RESIDUAL_VARIANCE_FLOOR) {
        return Err(Error::Degenerate(format!(
            "residual variance {var:e} (mean {mean:.6}) is degenerate"
        )));
    }
    ScalarGaussian::new(mean, var)
}

/// Test phase for a batch of latents and residuals.
pub fn detect(
    latents: &DataBatch,
    residuals: &DataBatch,
    det: &TrainedDetector,
    tau: f64,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<(Decision, CodelengthReport)> {
    if latents.dim() != det.latent_dim() {
        return Err(Error::mismatch(det.latent_dim(), latents.dim()));
    }
    if residuals.dim() != det.data_dim() {
        return Err(Error::mismatch(det.data_dim(), residuals.dim()));
    }
    if residuals.rows() != latents.rows() {
        return Err(Error::mismatch(latents.rows(), residuals.rows()));
    }
    let flat: Vec<f64> = residuals.iter_row_major().collect();
    let residual_bits = (
        residual_codelength(residuals, det.residual())?,
        scalar_universal_codelength(&flat, cfg.scalar_default)?,
    );
    assess(latents, det.latent_model(), Some(residual_bits), tau, lambda_grid, cfg)
}

/// Known-model variant: no residual term on either side.
pub fn detect_known_model(
    latents: &DataBatch,
    model: &GaussianModel,
    tau: f64,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<(Decision, CodelengthReport)> {
    if latents.dim() != model.dim() {
        return Err(Error::mismatch(model.dim(), latents.dim()));
    }
    assess(latents, model, None, tau, lambda_grid, cfg)
}

fn assess(
    latents: &DataBatch,
    model: &GaussianModel,
    residual_bits: Option<(f64, f64)>,
    tau: f64,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<(Decision, CodelengthReport)> {
    let (trained_residual, universal_residual) = residual_bits.unwrap_or((0.0, 0.0));
    let trained = TrainedBits {
        latent: gaussian_codelength(latents, model)?,
        residual: trained_residual,
    };
    let mut universal = universal_latent_codelength(latents, lambda_grid, cfg)?;
    universal.residual = universal_residual;
    let report = CodelengthReport::new(trained, universal);
    Ok((report.decision_at(tau), report))
}
