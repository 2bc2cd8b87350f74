use num_complex::Complex64;

use super::lm::{self, Problem, Transform};
use super::{relative_residual, FitResult, RealSeries};
use crate::error::{Error, Result};
use crate::optomech::{three_tone_s11, OpticalCavity};

/// Three-tone reflection data versus modulation frequency (Hz).
#[derive(Debug, Clone, PartialEq)]
pub enum S11Data {
    Magnitude(RealSeries),
    Complex {
        freq_hz: Vec<f64>,
        value: Vec<Complex64>,
        sigma: Option<Vec<f64>>,
    },
}

impl S11Data {
    fn freqs(&self) -> &[f64] {
        match self {
            S11Data::Magnitude(s) => &s.x,
            S11Data::Complex { freq_hz, .. } => freq_hz,
        }
    }

    fn magnitudes(&self) -> Vec<f64> {
        match self {
            S11Data::Magnitude(s) => s.y.clone(),
            S11Data::Complex { value, .. } => value.iter().map(|z| z.norm()).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            S11Data::Magnitude(s) => s.validate(),
            S11Data::Complex { freq_hz, value, sigma } => {
                if freq_hz.len() != value.len() || sigma.as_ref().is_some_and(|s| s.len() != value.len()) {
                    return Err(Error::domain("S11 column lengths differ"));
                }
                if freq_hz.iter().any(|f| !f.is_finite()) || value.iter().any(|z| !z.is_finite()) {
                    return Err(Error::domain("S11 data contain non-finite values"));
                }
                Ok(())
            }
        }
    }

    fn weighted(&self) -> bool {
        match self {
            S11Data::Magnitude(s) => s.sigma.is_some(),
            S11Data::Complex { sigma, .. } => sigma.is_some(),
        }
    }
}

struct S11Problem<'a> {
    data: &'a S11Data,
    f_c_hz: f64,
}

impl S11Problem<'_> {
    fn cavity(&self, p: &[f64]) -> OpticalCavity {
        OpticalCavity {
            f_c_hz: self.f_c_hz,
            kappa_hz: p[0] + p[1],
            kappa_e_hz: p[1],
        }
    }
}

impl Problem for S11Problem<'_> {
    fn n_residuals(&self) -> usize {
        match self.data {
            S11Data::Magnitude(s) => s.len(),
            S11Data::Complex { value, .. } => 2 * value.len(),
        }
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
        let c = self.cavity(p);
        match self.data {
            S11Data::Magnitude(s) => {
                for (i, (&f, &y)) in s.x.iter().zip(&s.y).enumerate() {
                    out[i] = s.weight(i) * (y - three_tone_s11(&c, p[2], f).norm());
                }
            }
            S11Data::Complex { freq_hz, value, sigma } => {
                for (i, (&f, &z)) in freq_hz.iter().zip(value).enumerate() {
                    let w = sigma.as_ref().map_or(1.0, |s| 1.0 / s[i]);
                    let d = z - three_tone_s11(&c, p[2], f);
                    out[2 * i] = w * d.re;
                    out[2 * i + 1] = w * d.im;
                }
            }
        }
        true
    }
}

/// Fit intrinsic loss, external coupling and carrier detuning to a
/// three-tone reflection sweep.
///
/// The magnitude is symmetric under exchanging the over- and undercoupled
/// solutions only approximately, so both branches are seeded and the lower
/// cost wins. `f_c_hz` only fixes the photon frequency scale.
pub fn optical_s11_fit(data: &S11Data, carrier_detuning_guess_hz: Option<f64>, f_c_hz: f64) -> Result<FitResult> {
    data.validate()?;
    let f = data.freqs();
    let mag = data.magnitudes();
    if f.len() < 8 {
        return Err(Error::domain(format!("S11 fit needs at least 8 points, got {}", f.len())));
    }
    if f.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("modulation frequencies must be strictly increasing"));
    }
    let imin = (0..mag.len()).min_by(|&a, &b| mag[a].total_cmp(&mag[b])).expect("non-empty");
    let top = mag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top - mag[imin] <= 1e-12 * top {
        return Err(Error::RankDeficient("no dip in the S11 sweep".into()));
    }
    let delta0 = carrier_detuning_guess_hz.unwrap_or(f[imin]);
    // Width of the dip at half depth seeds kappa; this reflection convention
    // gives an FWHM of about kappa/2.
    let inverted: Vec<f64> = mag.iter().map(|m| -m).collect();
    let span = f[f.len() - 1] - f[0];
    let dip = super::half_max_width(f, &inverted, -top).unwrap_or(span / 4.0);
    let kappa0 = 2.0 * dip;

    let problem = S11Problem { data, f_c_hz };
    let transforms = [
        Transform::Log,
        Transform::Log,
        Transform::Linear { offset: delta0, scale: kappa0 },
    ];
    let mut best: Option<lm::Outcome> = None;
    let mut last_err = None;
    for eta in [0.25, 0.5, 0.75] {
        let p0 = [(1.0 - eta) * kappa0, eta * kappa0, delta0];
        match lm::minimize(&problem, &transforms, &p0, data.weighted()) {
            Ok(o) => {
                if best.as_ref().is_none_or(|b| o.cost < b.cost) {
                    best = Some(o);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let out = best.ok_or_else(|| last_err.expect("at least one start ran"))?;

    let c = problem.cavity(&out.p);
    let model: Vec<f64> = f.iter().map(|&x| three_tone_s11(&c, out.p[2], x).norm()).collect();
    let mut fit = FitResult::from_outcome(
        &["kappa_i_hz", "kappa_e_hz", "delta0_hz"],
        &out,
        &transforms,
        relative_residual(&mag, &model),
    );

    let (ki, ke) = (out.p[0], out.p[1]);
    let k = ki + ke;
    let (sk, se) = match &out.cov_u {
        Some(cov) => {
            // Delta method in log coordinates: d kappa/du = (ki, ke).
            let gk = [ki, ke];
            let ge = [-ke * ki / (k * k), ki * ke / (k * k)];
            let quad = |g: [f64; 2]| {
                (g[0] * g[0] * cov[(0, 0)] + 2.0 * g[0] * g[1] * cov[(0, 1)] + g[1] * g[1] * cov[(1, 1)])
                    .max(0.0)
                    .sqrt()
            };
            (quad(gk), quad(ge))
        }
        None => (f64::NAN, f64::NAN),
    };
    fit.insert("kappa_hz", k, sk);
    fit.insert("eta_o", ke / k, se);
    if ke < ki {
        fit.flags.push("undercoupled".into());
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optomech::cavity_reflection;

    fn sweep(c: &OpticalCavity, carrier: f64) -> RealSeries {
        let f: Vec<f64> = (0..401).map(|i| 2e9 + 12e9 * i as f64 / 400.0).collect();
        let y = f.iter().map(|&x| three_tone_s11(c, carrier, x).norm()).collect();
        RealSeries::new(f, y)
    }

    fn reference() -> OpticalCavity {
        OpticalCavity {
            f_c_hz: 192.743e12,
            kappa_hz: 4.17e9,
            kappa_e_hz: 2.54e9,
        }
    }

    #[test]
    fn magnitude_round_trip() {
        let c = reference();
        let r = optical_s11_fit(&S11Data::Magnitude(sweep(&c, 8e9)), None, c.f_c_hz).unwrap();
        assert!((r.get("kappa_hz") / 4.17e9 - 1.0).abs() < 1e-3, "{r:?}");
        assert!((r.get("kappa_e_hz") / 2.54e9 - 1.0).abs() < 1e-3);
        assert!((r.get("eta_o") - 0.6091).abs() < 1e-3);
        assert!(r.residual_norm < 1e-8);
        assert!(!r.flags.contains(&"undercoupled".to_string()));
    }

    #[test]
    fn complex_round_trip() {
        let c = reference();
        let s = sweep(&c, 8e9);
        let value = s.x.iter().map(|&x| three_tone_s11(&c, 8e9, x)).collect();
        let d = S11Data::Complex { freq_hz: s.x.clone(), value, sigma: None };
        let r = optical_s11_fit(&d, Some(7.9e9), c.f_c_hz).unwrap();
        assert!((r.get("delta0_hz") / 8e9 - 1.0).abs() < 1e-6);
        assert!((r.get("kappa_i_hz") / 1.63e9 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn undercoupled_branch_flagged() {
        let c = OpticalCavity { kappa_e_hz: 0.2 * 4.17e9, ..reference() };
        let s = sweep(&c, 8e9);
        assert!(s.y.iter().all(|&m| m > 0.5));
        let r = optical_s11_fit(&S11Data::Magnitude(s), None, c.f_c_hz).unwrap();
        assert!(r.flags.contains(&"undercoupled".to_string()));
        assert!((r.get("eta_o") - 0.2).abs() < 1e-3);
    }

    #[test]
    fn critical_coupling_nulls_reflection() {
        let c = OpticalCavity { kappa_e_hz: 0.5 * 4.17e9, ..reference() };
        let r = optical_s11_fit(&S11Data::Magnitude(sweep(&c, 8e9)), None, c.f_c_hz).unwrap();
        let fitted = OpticalCavity {
            f_c_hz: c.f_c_hz,
            kappa_hz: r.get("kappa_hz"),
            kappa_e_hz: r.get("kappa_e_hz"),
        };
        assert!(cavity_reflection(&fitted, 0.0).norm() < 1e-3);
    }
}
