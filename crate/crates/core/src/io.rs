//! Text formats for matrices and trained detectors.
//!
//! Matrices use a one-line header followed by comma-separated rows:
//!
//! ```text
//! mdlood-matrix v1, rows=2, cols=3
//! 1.0000000000000000e0,-2.5000000000000000e-1,0.0000000000000000e0
//! ...
//! ```
//!
//! Cells are written with 17 significant digits, so every finite double
//! reads back bit-identically.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coder::TrainedDetector;
use crate::error::{Error, Result};
use crate::gaussian::{DataBatch, GaussianModel, ScalarGaussian};

const MATRIX_MAGIC: &str = "mdlood-matrix v1";
pub const DETECTOR_FORMAT_VERSION: u32 = 1;

pub fn format_matrix(batch: &DataBatch) -> String {
    let v = batch.values();
    let mut out = format!("{MATRIX_MAGIC}, rows={}, cols={}\n", v.nrows(), v.ncols());
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", v[(i, j)]).expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("expected header '{MATRIX_MAGIC}, rows=M, cols=d', found '{line}'"));
    let mut parts = line.split(',').map(str::trim);
    if parts.next() != Some(MATRIX_MAGIC) {
        return Err(bad());
    }
    let mut field = |key: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(key))
            .and_then(|p| p.strip_prefix('='))
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(bad)
    };
    let rows = field("rows")?;
    let cols = field("cols")?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((rows, cols))
}

/// Parses a matrix file body. Errors name the zero-based data row.
pub fn parse_matrix(text: &str) -> Result<DataBatch> {
    let mut lines = text.lines();
    let (rows, cols) = parse_header(lines.next().unwrap_or_default())?;
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(Error::Parse(format!("more than the declared {rows} rows")));
        }
        let start = values.len();
        for (j, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::InvalidRow {
                row: seen,
                reason: format!("cell {j} '{}' is not a number", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidRow {
                    row: seen,
                    reason: format!("cell {j} is non-finite ({v})"),
                });
            }
            values.push(v);
        }
        if values.len() - start != cols {
            return Err(Error::InvalidRow {
                row: seen,
                reason: format!("expected {cols} cells, found {}", values.len() - start),
            });
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("header declares {rows} rows, found {seen}")));
    }
    DataBatch::new(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix(path: &Path) -> Result<DataBatch> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, batch: &DataBatch) -> Result<()> {
    write_atomic(path, format_matrix(batch).as_bytes())
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialized [`TrainedDetector`]. Floats are written in shortest
/// round-trip form, which reads back bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorFile {
    pub format_version: u32,
    pub latent_dim: usize,
    pub data_dim: usize,
    pub residual_mean: f64,
    pub residual_var: f64,
    /// Row-major.
    pub latent_covariance: Vec<f64>,
    pub lambda_star: f64,
}

impl DetectorFile {
    pub fn from_detector(det: &TrainedDetector) -> Self {
        let cov = det.latent_model().covariance();
        let m = det.latent_dim();
        Self {
            format_version: DETECTOR_FORMAT_VERSION,
            latent_dim: m,
            data_dim: det.data_dim(),
            residual_mean: det.residual().mean,
            residual_var: det.residual().var,
            latent_covariance: (0..m).flat_map(|i| (0..m).map(move |j| cov[(i, j)])).collect(),
            lambda_star: det.lambda_star(),
        }
    }

    pub fn to_detector(&self) -> Result<TrainedDetector> {
        if self.format_version != DETECTOR_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported detector format version {}",
                self.format_version
            )));
        }
        let m = self.latent_dim;
        if self.latent_covariance.len() != m * m {
            return Err(Error::Parse(format!(
                "latent_covariance has {} entries, expected {}",
                self.latent_covariance.len(),
                m * m
            )));
        }
        let cov = DMatrix::from_row_slice(m, m, &self.latent_covariance);
        TrainedDetector::new(
            GaussianModel::zero_mean(cov)?,
            ScalarGaussian::new(self.residual_mean, self.residual_var)?,
            self.data_dim,
            self.lambda_star,
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("detector file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("detector file: {e}")))
    }
}

pub fn save_detector(path: &Path, det: &TrainedDetector) -> Result<()> {
    write_atomic(path, DetectorFile::from_detector(det).to_json().as_bytes())
}

pub fn load_detector(path: &Path) -> Result<TrainedDetector> {
    DetectorFile::from_json(&fs::read_to_string(path)?)?.to_detector()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_body_round_trip() {
        let b = DataBatch::from_rows(&[vec![1.0, -0.25, 0.0], vec![1e-300, 3.5e200, -7.0]]).unwrap();
        let text = format_matrix(&b);
        assert!(text.starts_with("mdlood-matrix v1, rows=2, cols=3\n"));
        assert_eq!(parse_matrix(&text).unwrap(), b);
    }

    #[test]
    fn nan_cell_names_row() {
        let text = "mdlood-matrix v1, rows=2, cols=2\n1,2\n3,NaN\n";
        match parse_matrix(text) {
            Err(Error::InvalidRow { row: 1, .. }) => {}
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        for text in [
            "",
            "matrix, rows=1, cols=1\n1\n",
            "mdlood-matrix v1, rows=2, cols=1\n1\n",
            "mdlood-matrix v1, rows=1, cols=1\n1\n2\n",
            "mdlood-matrix v1, rows=1, cols=2\n1\n",
            "mdlood-matrix v1, rows=1, cols=1\nabc\n",
            "mdlood-matrix v1, rows=x, cols=1\n1\n",
        ] {
            assert!(parse_matrix(text).is_err(), "accepted {text:?}");
        }
    }

    #[test]
    fn detector_round_trip_is_bit_identical() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 0.1, 0.1, 2.0f64.sqrt()]);
        let det = TrainedDetector::new(
            GaussianModel::zero_mean(cov).unwrap(),
            ScalarGaussian::new(0.1f64.exp(), std::f64::consts::PI).unwrap(),
            5,
            0.1 * 10f64.powf(1.0 / 19.0),
        )
        .unwrap();
        let file = DetectorFile::from_detector(&det);
        let back = DetectorFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        let det2 = back.to_detector().unwrap();
        assert_eq!(det2.latent_model().covariance(), det.latent_model().covariance());
        assert_eq!(det2.residual(), det.residual());
        assert_eq!(det2.lambda_star(), det.lambda_star());
    }

    #[test]
    fn detector_json_has_expected_keys() {
        let det = TrainedDetector::new(GaussianModel::standard(1).unwrap(), ScalarGaussian::standard(), 1, 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&DetectorFile::from_detector(&det).to_json()).unwrap();
        for key in [
            "format_version",
            "latent_dim",
            "data_dim",
            "residual_mean",
            "residual_var",
            "latent_covariance",
            "lambda_star",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let b = DataBatch::from_rows(&[vec![1.0]]).unwrap();
        write_matrix(&p, &b).unwrap();
        let b2 = DataBatch::from_rows(&[vec![2.0], vec![3.0]]).unwrap();
        write_matrix(&p, &b2).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), b2);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn any_finite_double_round_trips(bits in prop::collection::vec(any::<u64>(), 1..24)) {
            let vals: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).map(|v| if v.is_finite() { v } else { 0.0 }).collect();
            let cols = 3.min(vals.len());
            let rows = vals.len() / cols;
            let b = DataBatch::new(DMatrix::from_row_slice(rows, cols, &vals[..rows * cols])).unwrap();
            let back = parse_matrix(&format_matrix(&b)).unwrap();
            for (x, y) in b.iter_row_major().zip(back.iter_row_major()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
