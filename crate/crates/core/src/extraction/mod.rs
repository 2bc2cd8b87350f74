//! Parameter extraction from measured spectra and sweeps.

mod bcs;
mod bidirectional;
mod damping;
pub(crate) mod lm;
mod peaks;
mod s11;

use indexmap::IndexMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub use bcs::{bcs_resonance_fit, BcsPoint};
pub use bidirectional::{bidirectional_efficiency, SParamQuad};
pub use damping::{g0_from_damping, DampingPoint};
pub use peaks::{half_max_width, lorentzian, lorentzian_fit, sqrt_lorentzian, sqrt_lorentzian_fit};
pub use s11::{optical_s11_fit, S11Data};

/// Real-valued series `y(x)` with optional per-point standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl RealSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y, sigma: None }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::domain("x and y lengths differ"));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.x.len() {
                return Err(Error::domain("sigma length differs from data length"));
            }
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::domain("sigmas must be finite and > 0"));
            }
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(Error::domain("data contain non-finite values"));
        }
        Ok(())
    }

    pub(crate) fn weight(&self, i: usize) -> f64 {
        self.sigma.as_ref().map_or(1.0, |s| 1.0 / s[i])
    }
}

fn serialize_sigmas<S: Serializer>(m: &IndexMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let out: IndexMap<&str, Option<f64>> = m
        .iter()
        .map(|(k, v)| (k.as_str(), v.is_finite().then_some(*v)))
        .collect();
    out.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: IndexMap<String, f64>,
    /// One-sigma errors; `null` when the curvature is singular.
    #[serde(serialize_with = "serialize_sigmas")]
    pub sigmas: IndexMap<String, f64>,
    /// Unweighted `|y - f| / |y|` at the optimum.
    pub residual_norm: f64,
    pub converged: bool,
    pub n_iter: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn sigma(&self, name: &str) -> f64 {
        self.sigmas.get(name).copied().unwrap_or(f64::NAN)
    }

    pub(crate) fn insert(&mut self, name: &str, value: f64, sigma: f64) {
        self.params.insert(name.to_string(), value);
        self.sigmas.insert(name.to_string(), sigma);
    }

    pub(crate) fn from_outcome(names: &[&str], o: &lm::Outcome, t: &[lm::Transform], residual_norm: f64) -> Self {
        let sig = o.sigmas(t);
        let mut r = FitResult {
            params: IndexMap::new(),
            sigmas: IndexMap::new(),
            residual_norm,
            converged: true,
            n_iter: o.n_iter,
            flags: Vec::new(),
        };
        for (k, name) in names.iter().enumerate() {
            r.insert(name, o.p[k], sig[k]);
        }
        if o.cov_u.is_none() {
            r.flags.push("singular_curvature".into());
        }
        r
    }
}

/// `|a - b| / |a|` for two equally long vectors.
pub(crate) fn relative_residual(data: &[f64], model: &[f64]) -> f64 {
    let num: f64 = data.iter().zip(model).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = data.iter().map(|a| a * a).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
