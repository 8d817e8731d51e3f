use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::{sample_gaussian, DataBatch, GaussianModel, ScalarGaussian};

/// One test batch. Without residuals the batch is scored by the
/// known-model test.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialBatch {
    pub latents: DataBatch,
    pub residuals: Option<DataBatch>,
}

/// Supplies the batch for trial `trial`. Implementations must be pure
/// functions of `(trial, batch_size, seed)`.
pub trait BatchSource: Send + Sync {
    fn batch(&self, trial: usize, batch_size: usize, seed: u64) -> Result<TrialBatch>;
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fresh samples from a Gaussian for every trial.
#[derive(Clone, Debug)]
pub struct GaussianSource {
    pub latent: GaussianModel,
    /// Pooled iid residual model and residual dimension.
    pub residual: Option<(ScalarGaussian, usize)>,
    /// Separates the random streams of otherwise identical sources.
    pub stream: u64,
}

impl GaussianSource {
    pub fn new(latent: GaussianModel) -> Self {
        Self {
            latent,
            residual: None,
            stream: 0,
        }
    }

    pub fn with_residuals(mut self, model: ScalarGaussian, dim: usize) -> Self {
        self.residual = Some((model, dim));
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

impl BatchSource for GaussianSource {
    fn batch(&self, trial: usize, batch_size: usize, seed: u64) -> Result<TrialBatch> {
        let base = mix_seed(mix_seed(seed, self.stream), trial as u64);
        let latents = sample_gaussian(&self.latent, batch_size, base)?;
        let residuals = match self.residual {
            Some((model, dim)) => {
                let iid = GaussianModel::new(
                    nalgebra::DVector::from_element(dim, model.mean),
                    nalgebra::DMatrix::identity(dim, dim) * model.var,
                )?;
                Some(sample_gaussian(&iid, batch_size, mix_seed(base, 1))?)
            }
            None => None,
        };
        Ok(TrialBatch { latents, residuals })
    }
}

/// Batches drawn without replacement from fixed rows: the rows are shuffled
/// once by `seed` and trial `t` takes the `t`-th consecutive block.
#[derive(Clone, Debug)]
pub struct MatrixSource {
    latents: DataBatch,
    residuals: Option<DataBatch>,
}

impl MatrixSource {
    pub fn new(latents: DataBatch, residuals: Option<DataBatch>) -> Result<Self> {
        if let Some(r) = &residuals {
            if r.rows() != latents.rows() {
                return Err(Error::mismatch(latents.rows(), r.rows()));
            }
        }
        Ok(Self { latents, residuals })
    }

    pub fn rows(&self) -> usize {
        self.latents.rows()
    }

    fn order(&self, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx
    }
}

impl BatchSource for MatrixSource {
    fn batch(&self, trial: usize, batch_size: usize, seed: u64) -> Result<TrialBatch> {
        let end = (trial + 1)
            .checked_mul(batch_size)
            .filter(|&e| e <= self.rows())
            .ok_or_else(|| Error::SourceExhausted {
                trial,
                reason: format!(
                    "{} rows cannot supply {} disjoint batches of {}",
                    self.rows(),
                    trial + 1,
                    batch_size
                ),
            })?;
        let order = self.order(seed);
        let picked = &order[end - batch_size..end];
        Ok(TrialBatch {
            latents: self.latents.select_rows(picked)?,
            residuals: self.residuals.as_ref().map(|r| r.select_rows(picked)).transpose()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matrix_source_batches_are_disjoint() {
        let rows = DataBatch::new(DMatrix::from_fn(10, 1, |i, _| i as f64)).unwrap();
        let src = MatrixSource::new(rows, None).unwrap();
        let mut seen: Vec<f64> = (0..3)
            .flat_map(|t| src.batch(t, 3, 5).unwrap().latents.iter_row_major().collect::<Vec<_>>())
            .collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), 9);
        assert!(matches!(src.batch(3, 3, 5), Err(Error::SourceExhausted { trial: 3, .. })));
        assert!(matches!(src.batch(0, 11, 5), Err(Error::SourceExhausted { trial: 0, .. })));
    }

    #[test]
    fn gaussian_source_streams_differ() {
        let model = GaussianModel::standard(2).unwrap();
        let a = GaussianSource::new(model.clone());
        let b = GaussianSource::new(model).with_stream(1);
        assert_eq!(a.batch(0, 4, 9).unwrap(), a.batch(0, 4, 9).unwrap());
        assert_ne!(a.batch(0, 4, 9).unwrap(), b.batch(0, 4, 9).unwrap());
        assert_ne!(a.batch(0, 4, 9).unwrap(), a.batch(1, 4, 9).unwrap());
    }
}
