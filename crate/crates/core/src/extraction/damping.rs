use std::f64::consts::PI;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{relative_residual, FitResult};
use crate::error::{Error, Result};
use crate::optomech::{sideband_asymmetry_factor, OpticalCavity};

/// Mechanical linewidth `gamma_m / 2pi` (Hz) measured at intracavity photon number `n_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingPoint {
    pub n_c: f64,
    pub linewidth_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<f64>,
}

/// Weighted straight-line fit of linewidth against photon number.
///
/// The slope equals `g0^2 (L_+ - L_-)` at the given laser detuning, so its
/// sign must match the sign of `L_+ - L_-`.
pub fn g0_from_damping(
    points: &[DampingPoint],
    cavity: &OpticalCavity,
    f_m_hz: f64,
    detuning_hz: f64,
) -> Result<FitResult> {
    cavity.validate()?;
    if points
        .iter()
        .any(|p| !(p.n_c.is_finite() && p.n_c >= 0.0 && p.linewidth_hz.is_finite()))
    {
        return Err(Error::domain("damping points need finite n_c >= 0 and linewidths"));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.n_c).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::RankDeficient("damping fit needs at least two distinct n_c".into()));
    }
    if points.len() < 3 {
        return Err(Error::domain(format!("damping fit needs at least 3 points, got {}", points.len())));
    }
    let weighted = points.iter().all(|p| p.sigma_hz.is_some());
    let w: Vec<f64> = points
        .iter()
        .map(|p| match p.sigma_hz {
            Some(s) if weighted => 1.0 / (s * s),
            _ => 1.0,
        })
        .collect();
    if w.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::domain("damping sigmas must be finite and > 0"));
    }

    let sw: f64 = w.iter().sum();
    let mx = points.iter().zip(&w).map(|(p, w)| w * p.n_c).sum::<f64>() / sw;
    let my = points.iter().zip(&w).map(|(p, w)| w * p.linewidth_hz).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.n_c - mx).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.n_c - mx) * (p.linewidth_hz - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let resid: Vec<f64> = points.iter().map(|p| p.linewidth_hz - intercept - slope * p.n_c).collect();
    let chi2: f64 = resid.iter().zip(&w).map(|(r, w)| w * r * r).sum();
    let dof = points.len() - 2;
    let s2 = if weighted { 1.0 } else { chi2 / dof as f64 };
    let var_slope = s2 / sxx;
    let var_int = s2 * (1.0 / sw + mx * mx / sxx);

    let dl = sideband_asymmetry_factor(cavity, 2.0 * PI * f_m_hz, 2.0 * PI * detuning_hz);
    // slope (Hz per photon) = g0^2 dl / 2pi with g0 in rad/s.
    let g0_sq = 2.0 * PI * slope / dl;
    if !(g0_sq > 0.0) {
        return Err(Error::SignConvention(format!(
            "slope {slope:.4e} Hz/photon has the wrong sign for L+ - L- = {dl:.4e} s at detuning {detuning_hz:.4e} Hz"
        )));
    }
    let g0 = g0_sq.sqrt();
    let g0_hz = g0 / (2.0 * PI);
    // d g0_hz / d slope = (1/2pi) * (2pi/dl) / (2 g0)
    let sigma_g0 = var_slope.sqrt() / (dl * 2.0 * g0);

    let data: Vec<f64> = points.iter().map(|p| p.linewidth_hz).collect();
    let model: Vec<f64> = points.iter().map(|p| intercept + slope * p.n_c).collect();
    let mut fit = FitResult {
        params: IndexMap::new(),
        sigmas: IndexMap::new(),
        residual_norm: relative_residual(&data, &model),
        converged: true,
        n_iter: 1,
        flags: Vec::new(),
    };
    fit.insert("g0_hz", g0_hz, sigma_g0);
    fit.insert("gamma_m0_hz", intercept, var_int.sqrt());
    fit.insert("slope_hz_per_photon", slope, var_slope.sqrt());
    Ok(fit)
}
