//! Synthetic distribution shifts, registered by name.
//!
//! A shift is written `name` or `name:param`, e.g. `correlation-permute`,
//! `covariance-scale:1.5`, `mean-shift:3`, `rotation`.

use std::collections::BTreeMap;
use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian::GaussianModel;

pub trait Shift: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    /// Canonical `name[:param]` form.
    fn spec(&self) -> String;
    fn apply(&self, base: &GaussianModel, seed: u64) -> Result<GaussianModel>;
}

/// `P Sigma P^T` for a random non-identity permutation `P`: same diagonal
/// multiset, different joint distribution.
#[derive(Clone, Copy, Debug, Default)]
pub struct CorrelationPermute;

impl Shift for CorrelationPermute {
    fn name(&self) -> &'static str {
        "correlation-permute"
    }

    fn spec(&self) -> String {
        self.name().into()
    }

    fn apply(&self, base: &GaussianModel, seed: u64) -> Result<GaussianModel> {
        let d = base.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..d).collect();
        if d > 1 {
            while perm.iter().enumerate().all(|(i, &p)| i == p) {
                perm.shuffle(&mut rng);
            }
        }
        let cov = base.covariance();
        let shifted = DMatrix::from_fn(d, d, |i, j| cov[(perm[i], perm[j])]);
        let mean = DVector::from_fn(d, |i, _| base.mean()[perm[i]]);
        GaussianModel::new(mean, shifted)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CovarianceScale {
    pub factor: f64,
}

impl Shift for CovarianceScale {
    fn name(&self) -> &'static str {
        "covariance-scale"
    }

    fn spec(&self) -> String {
        format!("{}:{}", self.name(), self.factor)
    }

    fn apply(&self, base: &GaussianModel, _seed: u64) -> Result<GaussianModel> {
        if !(self.factor > 0.0) || !self.factor.is_finite() {
            return Err(Error::InvalidModel(format!("scale factor must be positive, got {}", self.factor)));
        }
        if self.factor == 1.0 {
            return Ok(base.clone());
        }
        GaussianModel::new(base.mean().clone(), base.covariance() * self.factor)
    }
}

/// Adds `delta` to every coordinate of the mean.
#[derive(Clone, Copy, Debug)]
pub struct MeanShift {
    pub delta: f64,
}

impl Shift for MeanShift {
    fn name(&self) -> &'static str {
        "mean-shift"
    }

    fn spec(&self) -> String {
        format!("{}:{}", self.name(), self.delta)
    }

    fn apply(&self, base: &GaussianModel, _seed: u64) -> Result<GaussianModel> {
        let mean = base.mean().map(|m| m + self.delta);
        GaussianModel::new(mean, base.covariance().clone())
    }
}

/// `Q Sigma Q^T` for a Haar-random orthogonal `Q`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rotation;

impl Shift for Rotation {
    fn name(&self) -> &'static str {
        "rotation"
    }

    fn spec(&self) -> String {
        self.name().into()
    }

    fn apply(&self, base: &GaussianModel, seed: u64) -> Result<GaussianModel> {
        let q = random_orthogonal(base.dim(), seed);
        let cov = &q * base.covariance() * q.transpose();
        GaussianModel::new(base.mean().clone(), (&cov + cov.transpose()) * 0.5)
    }
}

pub fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Applies `shift` to `base`; random shifts are deterministic in `seed`.
pub fn make_shift(base: &GaussianModel, shift: &dyn Shift, seed: u64) -> Result<GaussianModel> {
    shift.apply(base, seed)
}

type ShiftFactory = fn(Option<f64>) -> Result<Box<dyn Shift>>;

#[derive(Clone)]
pub struct ShiftRegistry {
    factories: BTreeMap<&'static str, ShiftFactory>,
}

impl Debug for ShiftRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

fn no_param(name: &str, param: Option<f64>) -> Result<()> {
    match param {
        Some(p) => Err(Error::Parse(format!("shift '{name}' takes no parameter, got {p}"))),
        None => Ok(()),
    }
}

impl ShiftRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("correlation-permute", |p| {
            no_param("correlation-permute", p)?;
            Ok(Box::new(CorrelationPermute))
        });
        r.register("covariance-scale", |p| {
            let factor = p.ok_or_else(|| Error::Parse("covariance-scale needs a factor".into()))?;
            Ok(Box::new(CovarianceScale { factor }))
        });
        r.register("mean-shift", |p| {
            let delta = p.ok_or_else(|| Error::Parse("mean-shift needs a delta".into()))?;
            Ok(Box::new(MeanShift { delta }))
        });
        r.register("rotation", |p| {
            no_param("rotation", p)?;
            Ok(Box::new(Rotation))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, factory: ShiftFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    /// Parses `name` or `name:param`.
    pub fn parse(&self, spec: &str) -> Result<Box<dyn Shift>> {
        let (name, param) = match spec.split_once(':') {
            Some((n, p)) => {
                let v: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad shift parameter '{p}' in '{spec}'")))?;
                (n.trim(), Some(v))
            }
            None => (spec.trim(), None),
        };
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: "shift",
            name: name.to_string(),
        })?;
        factory(param)
    }
}

impl Default for ShiftRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
