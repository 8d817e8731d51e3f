//! Batched trials, ROC analysis and synthetic shifts.

mod roc;
mod shift;
mod source;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use roc::{roc_auroc, RocResult};
pub use shift::{
    make_shift, random_orthogonal, CorrelationPermute, CovarianceScale, MeanShift, Rotation, Shift, ShiftRegistry,
};
pub use source::{mix_seed, BatchSource, GaussianSource, MatrixSource, TrialBatch};

use crate::coder::{CoderConfig, TrainedDetector};
use crate::detector::{detect, detect_known_model};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialConfig {
    pub batch_size: usize,
    pub trials: usize,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(batch_size: usize, trials: usize, seed: u64) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::InvalidData(format!("batch size must be >= 2, got {batch_size}")));
        }
        if trials == 0 {
            return Err(Error::InvalidData("need at least one trial".into()));
        }
        Ok(Self {
            batch_size,
            trials,
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialScores {
    pub scores_in: Vec<f64>,
    pub scores_out: Vec<f64>,
}

impl TrialScores {
    pub fn roc(&self) -> RocResult {
        roc_auroc(&self.scores_in, &self.scores_out)
    }
}

/// JSON summary of an evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub auroc: f64,
    #[serde(rename = "M")]
    pub batch_size: usize,
    pub trials: usize,
    pub shift_spec: Option<String>,
    pub seed: u64,
}

/// Scores one batch: `detect` with residuals, the known-model test against
/// the detector's latent model without.
pub fn score_batch(batch: &TrialBatch, det: &TrainedDetector, lambda_grid: &[f64], cfg: &CoderConfig) -> Result<f64> {
    let (_, report) = match &batch.residuals {
        Some(r) => detect(&batch.latents, r, det, 0.0, lambda_grid, cfg)?,
        None => detect_known_model(&batch.latents, det.latent_model(), 0.0, lambda_grid, cfg)?,
    };
    Ok(report.score)
}

/// Per-batch scores `L2 - L1` for `trials` batches from each source.
///
/// Trial `t` of either class draws with `(t, batch_size, seed)`, so the
/// result does not depend on execution order.
pub fn run_trials(
    det: &TrainedDetector,
    in_source: &dyn BatchSource,
    out_source: &dyn BatchSource,
    trial_cfg: &TrialConfig,
    lambda_grid: &[f64],
    cfg: &CoderConfig,
) -> Result<TrialScores> {
    let score_class = |source: &dyn BatchSource| -> Result<Vec<f64>> {
        (0..trial_cfg.trials)
            .into_par_iter()
            .map(|t| {
                let batch = source.batch(t, trial_cfg.batch_size, trial_cfg.seed)?;
                score_batch(&batch, det, lambda_grid, cfg)
            })
            .collect()
    };
    Ok(TrialScores {
        scores_in: score_class(in_source)?,
        scores_out: score_class(out_source)?,
    })
}
