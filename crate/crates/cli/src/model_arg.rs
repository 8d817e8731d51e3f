//! `--model` specs for `synth`:
//!
//! - `ggm:dim=D,density=P,pcor=R[,graph-seed=G]`
//! - `precision:PATH` (a matrix file holding a precision matrix)
//! - `iid:dim=D[,mean=MU][,var=V]`

use std::collections::BTreeMap;
use std::path::Path;

use mdlood_core::io::read_matrix;
use mdlood_core::synth::{model_from_precision, random_sparse_ggm, GgmSpec};
use mdlood_core::GaussianModel;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult, FileContext};

fn fields<'a>(body: &'a str, allowed: &[&str]) -> CliResult<BTreeMap<&'a str, &'a str>> {
    let mut out = BTreeMap::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::parse(format!("expected key=value, found '{part}'")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(CliError::parse(format!("unknown key '{k}' (expected one of {})", allowed.join(", "))));
        }
        if out.insert(k, v.trim()).is_some() {
            return Err(CliError::parse(format!("duplicate key '{k}'")));
        }
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(map: &BTreeMap<&str, &str>, key: &str, default: Option<T>) -> CliResult<T> {
    match map.get(key) {
        Some(v) => v.parse().map_err(|_| CliError::parse(format!("bad value '{v}' for '{key}'"))),
        None => default.ok_or_else(|| CliError::parse(format!("missing '{key}'"))),
    }
}

pub fn parse_model(spec: &str) -> CliResult<GaussianModel> {
    parse_inner(spec).map_err(|e| e.context(format_args!("model '{spec}'")))
}

fn parse_inner(spec: &str) -> CliResult<GaussianModel> {
    let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
    match kind.trim() {
        "ggm" => {
            let f = fields(body, &["dim", "density", "pcor", "graph-seed"])?;
            let ggm = GgmSpec {
                dim: number(&f, "dim", None)?,
                density: number(&f, "density", None)?,
                pcor: number(&f, "pcor", None)?,
            };
            let seed: u64 = number(&f, "graph-seed", Some(0))?;
            random_sparse_ggm(&ggm, seed).map(|(model, _)| model).map_err(|e| CliError::parse(e.to_string()))
        }
        "precision" => {
            let path = Path::new(body.trim());
            let omega = read_matrix(path).in_file("precision", path)?;
            model_from_precision(omega.values()).map_err(|e| CliError::parse(e.to_string()))
        }
        "iid" => {
            let f = fields(body, &["dim", "mean", "var"])?;
            let dim: usize = number(&f, "dim", None)?;
            let mean: f64 = number(&f, "mean", Some(0.0))?;
            let var: f64 = number(&f, "var", Some(1.0))?;
            if dim == 0 {
                return Err(CliError::parse("dim must be positive"));
            }
            GaussianModel::new(DVector::from_element(dim, mean), DMatrix::identity(dim, dim) * var)
                .map_err(|e| CliError::parse(e.to_string()))
        }
        other => Err(CliError::parse(format!("unknown model kind '{other}' (expected ggm, precision or iid)"))),
    }
}
