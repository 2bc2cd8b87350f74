use nalgebra::DMatrix;

use super::lm::{self, Problem, Transform};
use super::{median, relative_residual, FitResult, RealSeries};
use crate::error::{Error, Result};

/// `A (G/2)^2 / ((x - x0)^2 + (G/2)^2)`, unit height at the center.
pub fn lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let h = fwhm / 2.0;
    let d = x - center;
    offset + amplitude * h * h / (d * d + h * h)
}

/// Field-amplitude profile: square root of the unit-height Lorentzian.
pub fn sqrt_lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, offset: f64) -> f64 {
    let h = fwhm / 2.0;
    let d = x - center;
    offset + amplitude * h / (d * d + h * h).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Power,
    Amplitude,
}

impl Profile {
    fn eval(self, x: f64, p: &[f64]) -> f64 {
        match self {
            Profile::Power => lorentzian(x, p[0], p[1], p[2], p[3]),
            Profile::Amplitude => sqrt_lorentzian(x, p[0], p[1], p[2], p[3]),
        }
    }

    /// `[df/dx0, df/dfwhm, df/dA, df/doffset]`.
    fn gradient(self, x: f64, p: &[f64]) -> [f64; 4] {
        let (a, h) = (p[2], p[1] / 2.0);
        let d = x - p[0];
        let q = d * d + h * h;
        match self {
            Profile::Power => [
                a * 2.0 * d * h * h / (q * q),
                a * h * d * d / (q * q),
                h * h / q,
                1.0,
            ],
            Profile::Amplitude => {
                let q32 = q * q.sqrt();
                [a * h * d / q32, 0.5 * a * d * d / q32, h / q.sqrt(), 1.0]
            }
        }
    }

    /// Half-max full width of the profile divided by its FWHM parameter.
    fn width_ratio(self) -> f64 {
        match self {
            Profile::Power => 1.0,
            Profile::Amplitude => 3f64.sqrt(),
        }
    }
}

struct PeakProblem<'a> {
    data: &'a RealSeries,
    profile: Profile,
}

impl Problem for PeakProblem<'_> {
    fn n_residuals(&self) -> usize {
        self.data.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
        for (i, (&x, &y)) in self.data.x.iter().zip(&self.data.y).enumerate() {
            out[i] = self.data.weight(i) * (y - self.profile.eval(x, p));
        }
        true
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) -> bool {
        for (i, &x) in self.data.x.iter().enumerate() {
            let w = self.data.weight(i);
            for (j, g) in self.profile.gradient(x, p).into_iter().enumerate() {
                out[(i, j)] = -w * g;
            }
        }
        true
    }
}

/// Full width of the peak at `baseline + (max - baseline)/2`, by linear
/// interpolation between samples. `None` if neither side crosses.
pub fn half_max_width(x: &[f64], y: &[f64], baseline: f64) -> Option<f64> {
    let imax = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b]))?;
    let level = baseline + 0.5 * (y[imax] - baseline);
    let cross = |i: usize, j: usize| {
        let t = (level - y[i]) / (y[j] - y[i]);
        x[i] + t * (x[j] - x[i])
    };
    let left = (0..imax).rev().find(|&i| y[i] < level).map(|i| cross(i, i + 1));
    let right = (imax + 1..y.len()).find(|&i| y[i] < level).map(|i| cross(i, i - 1));
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (x[imax] - l)),
        (None, Some(r)) => Some(2.0 * (r - x[imax])),
        (None, None) => None,
    }
}

const NAMES: [&str; 4] = ["center", "fwhm", "amplitude", "offset"];

fn peak_fit(data: &RealSeries, profile: Profile) -> Result<FitResult> {
    data.validate()?;
    if data.len() < 8 {
        return Err(Error::domain(format!("peak fit needs at least 8 points, got {}", data.len())));
    }
    if data.x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("x must be strictly increasing"));
    }
    let (ymin, ymax) = data
        .y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let range = ymax - ymin;
    if range <= 1e-14 * ymax.abs().max(ymin.abs()) || range == 0.0 {
        return Err(Error::RankDeficient("data are flat; no peak to fit".into()));
    }
    let span = data.x[data.len() - 1] - data.x[0];
    let offset0 = median(&data.y);
    let imax = (0..data.len())
        .max_by(|&a, &b| data.y[a].total_cmp(&data.y[b]))
        .expect("non-empty");
    let center0 = data.x[imax];
    let amp0 = (ymax - offset0).max(0.5 * range);
    let width0 = half_max_width(&data.x, &data.y, offset0).unwrap_or(span / 4.0);
    let fwhm0 = (width0 / profile.width_ratio()).max(span * 1e-6);

    let transforms = [
        Transform::Linear { offset: center0, scale: fwhm0 },
        Transform::Log,
        Transform::Linear { offset: 0.0, scale: amp0 },
        Transform::Linear { offset: 0.0, scale: range },
    ];
    let problem = PeakProblem { data, profile };
    let out = lm::minimize(&problem, &transforms, &[center0, fwhm0, amp0, offset0], data.sigma.is_some())?;
    if out.conditioning <= lm::RANK_TOL {
        return Err(Error::RankDeficient(format!(
            "peak parameters are not separately identifiable (conditioning {:.2e})",
            out.conditioning
        )));
    }
    let model: Vec<f64> = data.x.iter().map(|&x| profile.eval(x, &out.p)).collect();
    let mut fit = FitResult::from_outcome(&NAMES, &out, &transforms, relative_residual(&data.y, &model));
    if span < 2.0 * out.p[1] {
        fit.flags.push("span_below_two_fwhm".into());
    }
    Ok(fit)
}

/// Fit `offset + A (G/2)^2 / ((f - f0)^2 + (G/2)^2)`.
pub fn lorentzian_fit(data: &RealSeries) -> Result<FitResult> {
    peak_fit(data, Profile::Power)
}

/// Fit `offset + A sqrt((G/2)^2 / ((f - f0)^2 + (G/2)^2))`.
pub fn sqrt_lorentzian_fit(data: &RealSeries) -> Result<FitResult> {
    peak_fit(data, Profile::Amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(profile: Profile, p: [f64; 4], n: usize) -> RealSeries {
        let x: Vec<f64> = (0..n)
            .map(|i| p[0] - 5.0 * p[1] + 10.0 * p[1] * i as f64 / (n - 1) as f64)
            .collect();
        let y = x.iter().map(|&x| profile.eval(x, &p)).collect();
        RealSeries::new(x, y)
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let p = [1.0, 0.3, 2.0, 0.1];
        for profile in [Profile::Power, Profile::Amplitude] {
            for x in [0.7, 1.05, 1.6] {
                let g = profile.gradient(x, &p);
                for j in 0..4 {
                    let h = 1e-6;
                    let mut a = p;
                    let mut b = p;
                    a[j] += h;
                    b[j] -= h;
                    let fd = (profile.eval(x, &a) - profile.eval(x, &b)) / (2.0 * h);
                    assert!((fd - g[j]).abs() < 1e-7, "{profile:?} j={j}: {fd} vs {}", g[j]);
                }
            }
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let p = [2.799e9, 67e3, 1.0, 0.05];
        for (profile, fit) in [
            (Profile::Power, lorentzian_fit as fn(&RealSeries) -> Result<FitResult>),
            (Profile::Amplitude, sqrt_lorentzian_fit),
        ] {
            let r = fit(&synth(profile, p, 201)).unwrap();
            for (k, name) in NAMES.iter().enumerate() {
                assert!((r.get(name) - p[k]).abs() <= 1e-9 * p[k].abs(), "{name}: {}", r.get(name));
            }
            assert!(r.residual_norm < 1e-8);
        }
    }

    #[test]
    fn amplitude_rescaling_leaves_shape() {
        let d = synth(Profile::Power, [10.0, 0.4, 3.0, 0.2], 101);
        let mut noisy = d.clone();
        for (i, y) in noisy.y.iter_mut().enumerate() {
            *y += 0.01 * ((i * 7919 % 101) as f64 / 101.0 - 0.5);
        }
        let a = lorentzian_fit(&noisy).unwrap();
        let mut scaled = noisy.clone();
        scaled.y.iter_mut().for_each(|y| *y *= 37.0);
        let b = lorentzian_fit(&scaled).unwrap();
        assert!((a.get("center") - b.get("center")).abs() < 1e-9 * a.get("center"));
        assert!((a.get("fwhm") / b.get("fwhm") - 1.0).abs() < 1e-9);
        assert!((b.get("amplitude") / a.get("amplitude") - 37.0).abs() < 1e-7);
    }

    #[test]
    fn flat_and_short_data_rejected() {
        let flat = RealSeries::new((0..20).map(f64::from).collect(), vec![1.0; 20]);
        assert!(matches!(lorentzian_fit(&flat), Err(Error::RankDeficient(_))));
        let short = synth(Profile::Power, [0.0, 1.0, 1.0, 0.0], 5);
        assert!(lorentzian_fit(&short).is_err());
    }

    #[test]
    fn half_max_of_samples() {
        let x: Vec<f64> = (0..=200).map(|i| -5.0 + 0.05 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&x| lorentzian(x, 0.0, 2.0, 1.0, 0.0)).collect();
        let w = half_max_width(&x, &y, 0.0).unwrap();
        assert!((w - 2.0).abs() < 1e-2);
    }
}
