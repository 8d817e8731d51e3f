//! Group out-of-distribution detection by codelength comparison.
//!
//! A batch of latent vectors (and optional reconstruction residuals) is
//! coded twice: once with the Gaussian statistics frozen at training time
//! (`L1`) and once with a universal coder that picks a sparse Gaussian
//! graphical model for the batch itself and pays for it in bits (`L2`).
//! The batch is flagged when `L2 - L1 < -tau`.
//!
//! ```
//! use mdlood_core::{detect_known_model, sample_gaussian, default_lambda_grid, CoderConfig, GaussianModel};
//!
//! let model = GaussianModel::standard(3).unwrap();
//! let batch = sample_gaussian(&model, 50, 7).unwrap();
//! let (decision, report) =
//!     detect_known_model(&batch, &model, 0.0, &default_lambda_grid(), &CoderConfig::default()).unwrap();
//! assert_eq!(decision.is_ood, report.score < 0.0);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coder;
pub mod detector;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod glasso;
pub mod io;
pub mod select;
pub mod synth;

pub use coder::{CodelengthReport, CoderConfig, TrainedDetector};
pub use detector::{detect, detect_known_model, train, Decision};
pub use error::{Error, Result};
pub use gaussian::{empirical_covariance, gaussian_codelength, sample_gaussian, DataBatch, GaussianModel, ScalarGaussian};
pub use glasso::{graphical_lasso, kkt_residual, GlassoConfig, GlassoSolution};
pub use select::{default_lambda_grid, dempster_completion, log_grid, select_model, CIGraph, SelectionConfig};
