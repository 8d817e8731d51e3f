//! Gaussian primitives shared by every coder.
//!
//! All codelengths in this crate are *differential* bits: `-log2` of a
//! density, with the fixed-point quantization constants dropped. Those
//! constants depend only on the precision and the dimension, so they are
//! identical for the trained and the universal coder and cancel whenever
//! the two are compared.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub(crate) const LOG2_2PI: f64 = 2.651_496_129_472_318_6;
const SYMMETRY_RTOL: f64 = 1e-10;
const EIGEN_RTOL: f64 = 1e-10;
const INVERSE_ATOL: f64 = 1e-8;

/// `0.5 * log2(2*pi*e)`, the differential entropy of N(0, 1) in bits.
pub const STD_NORMAL_ENTROPY_BITS: f64 = 2.047_095_585_180_641_6;

/// M samples of dimension d, stored one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct DataBatch {
    values: DMatrix<f64>,
}

impl DataBatch {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "batch must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..values.nrows() {
            if let Some(j) = (0..values.ncols()).find(|&j| !values[(i, j)].is_finite()) {
                return Err(Error::InvalidRow {
                    row: i,
                    reason: format!("non-finite value {} in column {}", values[(i, j)], j),
                });
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidRow {
                row: bad,
                reason: format!("expected {} columns, found {}", dim, rows[bad].len()),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// Values in row-major order.
    pub fn iter_row_major(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows()).flat_map(move |i| (0..self.dim()).map(move |j| self.values[(i, j)]))
    }

    pub fn concat(&self, other: &DataBatch) -> Result<DataBatch> {
        if self.dim() != other.dim() {
            return Err(Error::mismatch(self.dim(), other.dim()));
        }
        let m = self.rows();
        let values = DMatrix::from_fn(m + other.rows(), self.dim(), |i, j| {
            if i < m {
                self.values[(i, j)]
            } else {
                other.values[(i - m, j)]
            }
        });
        Ok(DataBatch { values })
    }

    /// Rows picked by index, in the order given.
    pub fn select_rows(&self, indices: &[usize]) -> Result<DataBatch> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.rows()) {
            return Err(Error::InvalidData(format!(
                "row index {} out of range for {} rows",
                bad,
                self.rows()
            )));
        }
        DataBatch::new(self.values.select_rows(indices))
    }
}

/// Multivariate normal with a validated covariance and its cached inverse.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    log2_det: f64,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 || covariance.ncols() != d {
            return Err(Error::InvalidModel(format!(
                "covariance must be square and non-empty, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.len() != d {
            return Err(Error::mismatch(d, mean.len()));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        let scale = covariance.amax();
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_RTOL * scale {
            return Err(Error::InvalidModel(format!(
                "covariance not symmetric (max asymmetry {asym:e})"
            )));
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        check_positive_definite(&covariance)?;
        let cholesky = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::InvalidModel("Cholesky factorization failed".into()))?;
        let precision = cholesky.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        let residual = (&precision * &covariance - DMatrix::identity(d, d)).amax();
        if residual > INVERSE_ATOL {
            return Err(Error::InvalidModel(format!(
                "covariance too ill-conditioned to invert (residual {residual:e})"
            )));
        }
        let log2_det = 2.0 * cholesky.l_dirty().diagonal().iter().map(|v| v.log2()).sum::<f64>();
        Ok(Self {
            mean,
            covariance,
            precision,
            cholesky,
            log2_det,
        })
    }

    pub fn zero_mean(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        Self::new(DVector::zeros(d), covariance)
    }

    /// N(0, I) in dimension `d`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::zero_mean(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log2_det(&self) -> f64 {
        self.log2_det
    }

    /// Differential entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.dim() as f64 * STD_NORMAL_ENTROPY_BITS + 0.5 * self.log2_det
    }

    /// `-log2 phi(x; mean, covariance)`.
    pub fn sample_codelength(&self, x: &DVector<f64>) -> f64 {
        let centered = x - &self.mean;
        let y = self
            .cholesky
            .l_dirty()
            .solve_lower_triangular(&centered)
            .expect("Cholesky factor has a positive diagonal");
        0.5 * (self.dim() as f64 * LOG2_2PI + self.log2_det + y.norm_squared() / std::f64::consts::LN_2)
    }
}

fn check_positive_definite(covariance: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(covariance.clone()).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    if !(max > 0.0) || min <= EIGEN_RTOL * max {
        return Err(Error::InvalidModel(format!(
            "covariance not positive definite (eigenvalues in [{min:e}, {max:e}])"
        )));
    }
    Ok(())
}

/// Scalar normal used for residual entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarGaussian {
    pub mean: f64,
    pub var: f64,
}

impl ScalarGaussian {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !var.is_finite() || var <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "scalar Gaussian needs finite mean and positive variance, got N({mean}, {var})"
            )));
        }
        Ok(Self { mean, var })
    }

    pub fn standard() -> Self {
        Self { mean: 0.0, var: 1.0 }
    }

    pub fn codelength(&self, v: f64) -> f64 {
        let z = v - self.mean;
        0.5 * (LOG2_2PI + self.var.log2() + z * z / (self.var * std::f64::consts::LN_2))
    }
}

/// Maximum-likelihood covariance (divisor M).
///
/// With `assume_zero_mean` the second moment about the origin is returned
/// and a single sample suffices; otherwise the sample mean is removed first
/// and at least two samples are required.
pub fn empirical_covariance(batch: &DataBatch, assume_zero_mean: bool) -> Result<DMatrix<f64>> {
    let m = batch.rows();
    if !assume_zero_mean && m < 2 {
        return Err(Error::InvalidData(
            "estimating the mean needs at least two samples".into(),
        ));
    }
    let x = batch.values();
    let centered = if assume_zero_mean {
        x.clone()
    } else {
        let mean = x.row_mean();
        let mut c = x.clone();
        for mut row in c.row_iter_mut() {
            row -= &mean;
        }
        c
    };
    let s = centered.transpose() * &centered / m as f64;
    Ok((&s + s.transpose()) * 0.5)
}

/// Sum that does not depend on the order of `terms`, so that codelengths of
/// iid models are bit-identical under row permutations.
pub(crate) fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Total differential codelength of the batch under `model`, in bits.
pub fn gaussian_codelength(batch: &DataBatch, model: &GaussianModel) -> Result<f64> {
    Ok(order_free_sum(per_sample_codelengths(batch, model)?))
}

pub fn per_sample_codelengths(batch: &DataBatch, model: &GaussianModel) -> Result<Vec<f64>> {
    if batch.dim() != model.dim() {
        return Err(Error::mismatch(model.dim(), batch.dim()));
    }
    Ok((0..batch.rows())
        .map(|i| model.sample_codelength(&batch.sample(i)))
        .collect())
}

/// Draws `count` samples from `model`, deterministic in `seed`.
pub fn sample_gaussian(model: &GaussianModel, count: usize, seed: u64) -> Result<DataBatch> {
    if count == 0 {
        return Err(Error::InvalidData("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.dim();
    let l = model.cholesky.l();
    let z = DMatrix::<f64>::from_fn(d, count, |_, _| StandardNormal.sample(&mut rng));
    let mut x = l * z;
    for mut col in x.column_iter_mut() {
        col += model.mean();
    }
    DataBatch::new(x.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch(rows: &[&[f64]]) -> DataBatch {
        DataBatch::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constants() {
        assert_relative_eq!(LOG2_2PI, (2.0 * std::f64::consts::PI).log2(), epsilon = 1e-15);
        assert_relative_eq!(
            STD_NORMAL_ENTROPY_BITS,
            0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_non_finite_rows() {
        let err = DataBatch::from_rows(&[vec![0.0, 1.0], vec![f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidRow { row: 1, .. }));
    }

    #[test]
    fn covariance_of_two_opposite_points() {
        let s = empirical_covariance(&batch(&[&[1.0, 0.0], &[-1.0, 0.0]]), true).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn covariance_of_identical_rows_is_zero() {
        let b = batch(&[&[0.3, -2.0, 5.0][..]; 4]);
        let s = empirical_covariance(&b, false).unwrap();
        assert!(s.amax() < 1e-15);
    }

    #[test]
    fn covariance_needs_two_rows_when_mean_estimated() {
        let b = batch(&[&[1.0, 2.0]]);
        assert!(empirical_covariance(&b, false).is_err());
        assert!(empirical_covariance(&b, true).is_ok());
    }

    #[test]
    fn covariance_matches_double_loop() {
        let b = sample_gaussian(&GaussianModel::standard(3).unwrap(), 5, 11).unwrap();
        let s = empirical_covariance(&b, false).unwrap();
        let m = b.rows();
        let mean: Vec<f64> = (0..3)
            .map(|j| (0..m).map(|i| b.values()[(i, j)]).sum::<f64>() / m as f64)
            .collect();
        for j in 0..3 {
            for k in 0..3 {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += (b.values()[(i, j)] - mean[j]) * (b.values()[(i, k)] - mean[k]);
                }
                assert!((s[(j, k)] - acc / m as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn codelength_at_the_mode() {
        let model = GaussianModel::standard(1).unwrap();
        let bits = gaussian_codelength(&batch(&[&[0.0]]), &model).unwrap();
        assert_relative_eq!(bits, 1.325_748_064_736_159_3, epsilon = 1e-12);
    }

    #[test]
    fn codelength_one_sigma_out() {
        // -log2(exp(-1/2) / sqrt(2 pi))
        let oracle = -((-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt()).log2();
        let model = GaussianModel::standard(1).unwrap();
        let bits = gaussian_codelength(&batch(&[&[1.0]]), &model).unwrap();
        assert_relative_eq!(bits, oracle, epsilon = 1e-12);
        assert!((bits - 2.0471).abs() < 1e-4);
    }

    #[test]
    fn identity_codelength_factorizes() {
        let m2 = GaussianModel::standard(2).unwrap();
        let m1 = GaussianModel::standard(1).unwrap();
        let (a, b) = (0.7, -1.9);
        let joint = gaussian_codelength(&batch(&[&[a, b]]), &m2).unwrap();
        let split = gaussian_codelength(&batch(&[&[a]]), &m1).unwrap()
            + gaussian_codelength(&batch(&[&[b]]), &m1).unwrap();
        assert!((joint - split).abs() < 1e-12);
    }

    #[test]
    fn codelength_rejects_dimension_mismatch() {
        let model = GaussianModel::standard(2).unwrap();
        assert!(matches!(
            gaussian_codelength(&batch(&[&[1.0]]), &model),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn rejects_singular_and_asymmetric_covariances() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(GaussianModel::zero_mean(singular), Err(Error::InvalidModel(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(matches!(GaussianModel::zero_mean(asym), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn precision_inverts_covariance() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.3, 0.1, 0.3, 1.5]);
        let model = GaussianModel::zero_mean(cov.clone()).unwrap();
        assert!((model.precision() * &cov - DMatrix::identity(3, 3)).amax() < 1e-8);
        assert_relative_eq!(model.log2_det(), cov.determinant().log2(), epsilon = 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = GaussianModel::standard(3).unwrap();
        assert_eq!(
            sample_gaussian(&model, 20, 5).unwrap(),
            sample_gaussian(&model, 20, 5).unwrap()
        );
        assert_ne!(
            sample_gaussian(&model, 20, 5).unwrap(),
            sample_gaussian(&model, 20, 6).unwrap()
        );
        let one = sample_gaussian(&model, 1, 0).unwrap();
        assert_eq!(one.rows(), 1);
        assert!(sample_gaussian(&model, 0, 0).is_err());
    }

    #[test]
    fn sampled_covariance_converges() {
        let model = GaussianModel::standard(4).unwrap();
        let b = sample_gaussian(&model, 10_000, 3).unwrap();
        let s = empirical_covariance(&b, false).unwrap();
        assert!((s - DMatrix::identity(4, 4)).amax() < 0.1);
    }

    #[test]
    fn sample_mean_follows_model_mean() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
        let model = GaussianModel::new(DVector::from_vec(vec![3.0, -1.0]), cov.clone()).unwrap();
        let b = sample_gaussian(&model, 20_000, 9).unwrap();
        let mean = b.values().row_mean();
        assert!((mean[0] - 3.0).abs() < 0.05 && (mean[1] + 1.0).abs() < 0.05);
        assert!((empirical_covariance(&b, false).unwrap() - cov).amax() < 0.1);
    }

    #[test]
    fn per_sample_entropy_rate() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.0, 0.4, 1.0, 0.4, 0.0, 0.4, 1.0]);
        let model = GaussianModel::zero_mean(cov).unwrap();
        let b = sample_gaussian(&model, 5000, 21).unwrap();
        let rate = gaussian_codelength(&b, &model).unwrap() / 5000.0;
        assert!((rate / model.entropy_bits() - 1.0).abs() < 0.02);
    }

    #[test]
    fn scalar_matches_one_dimensional_model() {
        let s = ScalarGaussian::new(0.5, 2.0).unwrap();
        let m = GaussianModel::new(DVector::from_element(1, 0.5), DMatrix::from_element(1, 1, 2.0))
            .unwrap();
        let v = -0.8;
        assert_relative_eq!(s.codelength(v), m.sample_codelength(&DVector::from_element(1, v)), epsilon = 1e-12);
        assert!(ScalarGaussian::new(0.0, 0.0).is_err());
    }
}
