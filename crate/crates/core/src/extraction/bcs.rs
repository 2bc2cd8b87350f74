use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::lm::{self, Problem, Transform};
use super::{relative_residual, FitResult};
use crate::em_circuit::kinetic_factor;
use crate::error::{require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcsPoint {
    pub t_k: f64,
    pub freq_hz: f64,
}

/// Parameters are `[q, L_geo, L_k0]` with `T_c = T_max (1 + q)`, so the fitted
/// critical temperature always lies above the warmest point.
struct BcsProblem<'a> {
    points: &'a [BcsPoint],
    capacitance_f: f64,
    t_max: f64,
}

impl BcsProblem<'_> {
    fn freq(&self, p: &[f64], t: f64) -> f64 {
        let t_c = self.t_max * (1.0 + p[0]);
        let l = p[1] + p[2] * kinetic_factor(t, t_c);
        1.0 / (2.0 * PI * (l * self.capacitance_f).sqrt())
    }
}

impl Problem for BcsProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.points.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
        for (i, pt) in self.points.iter().enumerate() {
            let l = p[1] + p[2] * kinetic_factor(pt.t_k, self.t_max * (1.0 + p[0]));
            if l <= 0.0 {
                return false;
            }
            out[i] = pt.freq_hz - self.freq(p, pt.t_k);
        }
        true
    }
}

/// Fit the BCS kinetic-inductance model to matching-resonance frequencies.
///
/// Only the product `L C` is observable, so the node capacitance must be
/// supplied; the inductances are reported for that capacitance.
pub fn bcs_resonance_fit(points: &[BcsPoint], capacitance_f: f64) -> Result<FitResult> {
    require_positive("capacitance_f", capacitance_f)?;
    if points
        .iter()
        .any(|p| !(p.t_k.is_finite() && p.t_k >= 0.0 && p.freq_hz.is_finite() && p.freq_hz > 0.0))
    {
        return Err(Error::domain("BCS points need finite T >= 0 and f > 0"));
    }
    let mut temps: Vec<f64> = points.iter().map(|p| p.t_k).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if temps.len() < 2 {
        return Err(Error::RankDeficient("all points share one temperature".into()));
    }
    if temps.len() < 4 {
        return Err(Error::domain(format!("BCS fit needs at least 4 temperatures, got {}", temps.len())));
    }
    let (t_min, t_max) = (temps[0], temps[temps.len() - 1]);
    let l_of = |f: f64| 1.0 / ((2.0 * PI * f).powi(2) * capacitance_f);
    let mean_l = |t: f64| {
        let v: Vec<f64> = points.iter().filter(|p| p.t_k == t).map(|p| l_of(p.freq_hz)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (l_cold, l_warm) = (mean_l(t_min), mean_l(t_max));

    let problem = BcsProblem { points, capacitance_f, t_max };
    let transforms = [
        Transform::Log,
        Transform::Log,
        Transform::Linear { offset: 0.0, scale: l_cold },
    ];
    let mut best: Option<lm::Outcome> = None;
    let mut last_err = None;
    // The cost has separate basins in T_c, so start from a ladder of values.
    for q in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0, 1.5, 2.0] {
        let t_c = t_max * (1.0 + q);
        let (f_cold, f_warm) = (kinetic_factor(t_min, t_c), kinetic_factor(t_max, t_c));
        let mut lk = if f_warm > f_cold { ((l_warm - l_cold) / (f_warm - f_cold)).max(0.0) } else { 0.0 };
        let mut lg = l_cold - lk * f_cold;
        if lg <= 0.0 {
            // Too little geometric inductance; keep the cold point and clamp.
            lg = 0.05 * l_cold;
            lk = (l_cold - lg) / f_cold;
        }
        match lm::minimize(&problem, &transforms, &[q, lg, lk], false) {
            Ok(o) if best.as_ref().is_none_or(|b| o.cost < b.cost) => best = Some(o),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let out = match (best, last_err) {
        (Some(o), _) => o,
        (None, Some(e)) => return Err(e),
        (None, None) => {
            return Err(Error::domain("no physical starting point for the BCS fit"));
        }
    };

    let sig = out.sigmas(&transforms);
    let data: Vec<f64> = points.iter().map(|p| p.freq_hz).collect();
    let model: Vec<f64> = points.iter().map(|p| problem.freq(&out.p, p.t_k)).collect();
    let mut fit = FitResult::from_outcome(&["t_c_k", "l_geometric_h", "l_kinetic0_h"], &out, &transforms, relative_residual(&data, &model));
    fit.insert("t_c_k", t_max * (1.0 + out.p[0]), t_max * sig[0]);
    if out.conditioning <= lm::RANK_TOL {
        fit.flags.push("t_c_unconstrained".into());
    }
    if t_max - t_min < 0.5 * fit.get("t_c_k") {
        fit.flags.push("narrow_temperature_span".into());
    }
    Ok(fit)
}
