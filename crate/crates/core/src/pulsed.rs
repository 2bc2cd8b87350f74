//! Pulsed conversion cycle: square microwave loading of a mechanical mode
//! whose frequency jitters from shot to shot, free decay, and readout by a
//! short red-detuned optical pulse.
//!
//! One shot with detuning `delta = omega_m - omega_d` obeys
//! `d beta/dt = -(gamma/2 + i delta) beta + Omega_d` while the drive is on,
//! so with `a = gamma/2 + i delta`
//!
//! ```text
//! beta(t) = beta0 e^{-a t} + (Omega_d / a)(1 - e^{-a t})      t <= T_p
//! beta(t) = beta(T_p) e^{-a (t - T_p)}                         t >  T_p
//! ```
//!
//! and the mode population is `|beta|^2`. Jitter is quasi-static: `delta`
//! is drawn once per shot and ensemble quantities average over draws.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::DeviceModel;
use crate::em_circuit::electromechanical_efficiency;
use crate::error::{require_finite, require_positive, Error, Result};
use crate::optomech::{
    mechanics_to_optics_efficiency, swap_probability, Drive, DriveTone, MechanicalMode,
};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSchedule {
    pub mw_freq_hz: f64,
    pub mw_duration_s: f64,
    /// Coherent drive amplitude `Omega_d` (rad/s); sets the phonon scale only.
    pub mw_drive_rate: f64,
    /// Readout time measured from the start of the microwave pulse.
    pub readout_delay_s: f64,
    pub optical_pulse: DriveTone,
    /// Should be many lifetimes so the mode rethermalizes between shots.
    pub repetition_period_s: f64,
    #[serde(default)]
    pub initial_amplitude: f64,
    /// Incoherent thermal population added to every readout.
    #[serde(default)]
    pub background_phonons: f64,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        require_positive("mw_freq_hz", self.mw_freq_hz)?;
        require_positive("mw_duration_s", self.mw_duration_s)?;
        require_positive("repetition_period_s", self.repetition_period_s)?;
        require_finite("initial_amplitude", self.initial_amplitude)?;
        for (name, v) in [
            ("mw_drive_rate", self.mw_drive_rate),
            ("readout_delay_s", self.readout_delay_s),
            ("background_phonons", self.background_phonons),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.optical_pulse.validate()?;
        if !matches!(self.optical_pulse.drive, Drive::Pulsed { .. }) {
            return Err(Error::domain("optical readout must be a pulsed drive"));
        }
        Ok(())
    }

    /// Coherent amplitude at time `t` for a shot with detuning `delta` (rad/s).
    pub fn amplitude(&self, gamma: f64, delta: f64, t: f64) -> Complex64 {
        self.amplitude_for_length(self.mw_duration_s, gamma, delta, t)
    }

    fn amplitude_for_length(&self, t_p: f64, gamma: f64, delta: f64, t: f64) -> Complex64 {
        let a = Complex64::new(gamma / 2.0, delta);
        let on = t.min(t_p);
        let decay = (-a * on).exp();
        let mut beta = self.initial_amplitude * decay + self.mw_drive_rate / a * (1.0 - decay);
        if t > t_p {
            beta *= (-a * (t - t_p)).exp();
        }
        beta
    }

    /// Ideal steady-state population `Omega_d^2 / (gamma/2)^2` on resonance.
    pub fn steady_state_population(&self, gamma: f64) -> f64 {
        (self.mw_drive_rate / (gamma / 2.0)).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JitterDistribution {
    None,
    /// One Gaussian frequency offset per shot.
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterModel {
    /// Mean mechanical frequency.
    pub center_hz: f64,
    pub distribution: JitterDistribution,
    /// Standard deviation of the frequency offset; `None` until calibrated.
    #[serde(default)]
    pub sigma_hz: Option<f64>,
    /// Lifetime-limited energy decay rate `1/tau_m` (rad/s).
    pub intrinsic_gamma: f64,
}

impl JitterModel {
    /// Uncalibrated Gaussian model for a mode with a measured lifetime.
    pub fn for_mode(m: &MechanicalMode) -> Result<Self> {
        let gamma = m.intrinsic_gamma().ok_or_else(|| {
            Error::domain(format!("mode `{}` has no lifetime (tau_s) configured", m.name))
        })?;
        Ok(Self {
            center_hz: m.f_m_hz,
            distribution: JitterDistribution::Gaussian,
            sigma_hz: None,
            intrinsic_gamma: gamma,
        })
    }

    pub fn without_jitter(self) -> Self {
        Self {
            distribution: JitterDistribution::None,
            sigma_hz: Some(0.0),
            ..self
        }
    }

    pub fn with_sigma(self, sigma_hz: f64) -> Self {
        Self {
            sigma_hz: Some(sigma_hz),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("center_hz", self.center_hz)?;
        require_positive("intrinsic_gamma", self.intrinsic_gamma)?;
        if let Some(s) = self.sigma_hz {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::domain(format!("sigma_hz must be >= 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Effective jitter width, zero without jitter.
    pub fn sigma(&self) -> Result<f64> {
        self.validate()?;
        match self.distribution {
            JitterDistribution::None => Ok(0.0),
            JitterDistribution::Gaussian => self.sigma_hz.ok_or_else(|| {
                Error::Uncalibrated("gaussian jitter has no sigma; calibrate it first".into())
            }),
        }
    }

    /// Choose `sigma` so the readout spectrum of `s` has half-max full width
    /// `target_fwhm_hz`.
    pub fn calibrate(self, s: &PulseSchedule, target_fwhm_hz: f64) -> Result<Self> {
        s.validate()?;
        self.validate()?;
        require_positive("target_fwhm_hz", target_fwhm_hz)?;
        if self.distribution == JitterDistribution::None {
            return Err(Error::domain("cannot calibrate a model without jitter"));
        }
        let nodes = gauss_nodes(QUAD_NODES);
        let width = |sigma: f64| quadrature_fwhm(s, self.intrinsic_gamma, sigma, &nodes);
        let bare = width(0.0)?;
        if bare >= target_fwhm_hz {
            return Err(Error::domain(format!(
                "unbroadened width {bare:.4e} Hz already exceeds the target {target_fwhm_hz:.4e} Hz"
            )));
        }
        let (mut lo, mut hi) = (0.0, target_fwhm_hz);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if width(mid)? < target_fwhm_hz {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(self.with_sigma(0.5 * (lo + hi)))
    }
}

/// Monte Carlo settings. Draws come in antithetic pairs `(z, -z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 20_240_101,
        }
    }
}

/// Standard-normal draws shared between evaluations (common random numbers).
#[derive(Debug, Clone)]
pub struct Draws {
    z: Vec<f64>,
}

impl Draws {
    pub fn new(mc: &MonteCarlo) -> Result<Self> {
        if mc.samples < 2 {
            return Err(Error::domain("Monte Carlo needs at least 2 samples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        let pairs = mc.samples.div_ceil(2);
        let z = (0..pairs).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(Self { z })
    }

    pub fn pairs(&self) -> usize {
        self.z.len()
    }

    /// Raw draws, one per antithetic pair.
    pub fn values(&self) -> &[f64] {
        &self.z
    }
}

const CHUNK: usize = 256;

/// Ensemble mean and standard error of `f(delta_jitter, x)` at every `x`.
///
/// Chunks are reduced in index order so the result does not depend on the
/// thread schedule.
fn ensemble<F>(sigma_hz: f64, draws: &Draws, xs: &[f64], f: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if sigma_hz == 0.0 {
        return (xs.iter().map(|&x| f(0.0, x)).collect(), vec![0.0; xs.len()]);
    }
    let n = xs.len();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = draws
        .z
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            for &z in chunk {
                let d = TWO_PI * sigma_hz * z;
                for (k, &x) in xs.iter().enumerate() {
                    let m = 0.5 * (f(d, x) + f(-d, x));
                    sum[k] += m;
                    sq[k] += m * m;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (s, q) in &partials {
        for k in 0..n {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let np = draws.pairs() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / np).collect();
    let se = mean
        .iter()
        .zip(&sq)
        .map(|(m, q)| {
            let var = ((q / np - m * m) * np / (np - 1.0)).max(0.0);
            (var / np).sqrt()
        })
        .collect();
    (mean, se)
}

const QUAD_NODES: usize = 801;

/// Equally spaced Gaussian-weighted nodes on `[-8, 8]` standard deviations.
fn gauss_nodes(n: usize) -> Vec<(f64, f64)> {
    let raw: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = -8.0 + 16.0 * i as f64 / (n - 1) as f64;
            (x, (-0.5 * x * x).exp())
        })
        .collect();
    let norm: f64 = raw.iter().map(|p| p.1).sum();
    raw.into_iter().map(|(x, w)| (x, w / norm)).collect()
}

fn quadrature_population(
    s: &PulseSchedule,
    gamma: f64,
    sigma_hz: f64,
    nodes: &[(f64, f64)],
    drive_offset: f64,
) -> f64 {
    nodes
        .iter()
        .map(|&(x, w)| {
            let delta = TWO_PI * (sigma_hz * x - drive_offset);
            w * s.amplitude(gamma, delta, s.readout_delay_s).norm_sqr()
        })
        .sum()
}

/// Full width at half maximum of the noise-free (quadrature) readout spectrum.
fn quadrature_fwhm(s: &PulseSchedule, gamma: f64, sigma_hz: f64, nodes: &[(f64, f64)]) -> Result<f64> {
    let g = |offset: f64| quadrature_population(s, gamma, sigma_hz, nodes, offset);
    let half = 0.5 * g(0.0);
    // The line is at least as wide as the lifetime limit, so step in units of it.
    let step = (gamma / TWO_PI).min(1.0 / s.mw_duration_s) / 8.0 + sigma_hz / 16.0;
    let mut hi = step;
    let mut iter = 0;
    while g(hi) > half {
        hi += step;
        iter += 1;
        if iter > 100_000 {
            return Err(Error::NotConverged {
                iterations: iter,
                residual: g(hi) / half,
            });
        }
    }
    let mut lo = hi - step;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t_s: f64,
    pub phonons: f64,
    pub std_err: f64,
}

fn check_grid(name: &str, grid: &[f64], nonneg: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain(format!("{name} is empty")));
    }
    if grid.iter().any(|x| !x.is_finite() || (nonneg && *x < 0.0)) {
        return Err(Error::domain(format!("{name} has non-finite or negative entries")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain(format!("{name} must be sorted")));
    }
    Ok(())
}

/// Ensemble-averaged phonon number on `t_grid` (seconds from pulse start).
pub fn mode_population_trace(
    s: &PulseSchedule,
    j: &JitterModel,
    t_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<Vec<TracePoint>> {
    s.validate()?;
    check_grid("t_grid", t_grid, true)?;
    let sigma = j.sigma()?;
    let draws = Draws::new(mc)?;
    let offset = TWO_PI * (j.center_hz - s.mw_freq_hz);
    let gamma = j.intrinsic_gamma;
    let (mean, se) = ensemble(sigma, &draws, t_grid, |d, t| {
        s.amplitude(gamma, offset + d, t).norm_sqr()
    });
    Ok(t_grid
        .iter()
        .zip(mean.iter().zip(&se))
        .map(|(&t, (&m, &e))| TracePoint {
            t_s: t,
            phonons: m + s.background_phonons,
            std_err: e,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub freq_hz: f64,
    /// Readout population, proportional to detected counts.
    pub phonons: f64,
    pub std_err: f64,
}

/// Readout population at `readout_delay_s` as the microwave drive is swept.
pub fn conversion_spectrum(
    s: &PulseSchedule,
    j: &JitterModel,
    freq_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<Vec<SpectrumPoint>> {
    s.validate()?;
    check_grid("freq_grid", freq_grid, true)?;
    let sigma = j.sigma()?;
    let draws = Draws::new(mc)?;
    let gamma = j.intrinsic_gamma;
    let (mean, se) = ensemble(sigma, &draws, freq_grid, |d, f| {
        let delta = TWO_PI * (j.center_hz - f) + d;
        s.amplitude(gamma, delta, s.readout_delay_s).norm_sqr()
    });
    Ok(freq_grid
        .iter()
        .zip(mean.iter().zip(&se))
        .map(|(&f, (&m, &e))| SpectrumPoint {
            freq_hz: f,
            phonons: m + s.background_phonons,
            std_err: e,
        })
        .collect())
}

/// Maximize a unimodal-ish function on `[lo, hi]`: log-spaced scan, then
/// golden-section refinement around the best sample.
fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const SCAN: usize = 64;
    let ratio = (hi / lo).ln();
    let xs: Vec<f64> = (0..SCAN)
        .map(|i| lo * (ratio * i as f64 / (SCAN - 1) as f64).exp())
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let best = (0..SCAN)
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .expect("scan is non-empty");
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(SCAN - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-10 * b {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let (fx, fb) = (f(x), ys[best]);
    if fb > fx {
        (xs[best], fb)
    } else {
        (x, fx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyDefinition {
    /// Best phonons loaded per unit drive time, optimized over pulse length
    /// with readout at the end of the pulse.
    #[default]
    LoadingEfficiency,
    /// Peak ensemble population of the configured schedule, optimized over
    /// readout delay.
    PeakPopulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Penalty {
    pub definition: PenaltyDefinition,
    pub value: f64,
    pub std_err: f64,
    /// Optimal pulse length (or readout delay) without jitter.
    pub optimum_unjittered_s: f64,
    pub optimum_jittered_s: f64,
}

/// Loss of loading efficiency from jitter: the no-jitter optimum divided by
/// the jittered optimum, each on resonance with the mean frequency.
pub fn loading_efficiency_penalty(
    s: &PulseSchedule,
    j: &JitterModel,
    mc: &MonteCarlo,
    definition: PenaltyDefinition,
) -> Result<Penalty> {
    s.validate()?;
    let sigma = j.sigma()?;
    let gamma = j.intrinsic_gamma;
    let tau = 1.0 / gamma;
    let draws = Draws::new(mc)?;
    let objective = |sig: f64, x: f64| -> (f64, f64) {
        let (m, e) = match definition {
            PenaltyDefinition::LoadingEfficiency => ensemble(sig, &draws, &[x], |d, t_p| {
                s.amplitude_for_length(t_p, gamma, d, t_p).norm_sqr() / t_p
            }),
            PenaltyDefinition::PeakPopulation => ensemble(sig, &draws, &[x], |d, t| {
                s.amplitude(gamma, d, t).norm_sqr()
            }),
        };
        (m[0], e[0])
    };
    let (lo, hi) = match definition {
        PenaltyDefinition::LoadingEfficiency => (1e-3 * tau, 20.0 * tau),
        PenaltyDefinition::PeakPopulation => (1e-3 * s.mw_duration_s, s.mw_duration_s + 5.0 * tau),
    };
    let (x0, best0) = maximize(|x| objective(0.0, x).0, lo, hi);
    if best0 <= 0.0 {
        return Err(Error::domain("drive produces no population; penalty undefined"));
    }
    if sigma == 0.0 {
        return Ok(Penalty {
            definition,
            value: 1.0,
            std_err: 0.0,
            optimum_unjittered_s: x0,
            optimum_jittered_s: x0,
        });
    }
    let (x1, _) = maximize(|x| objective(sigma, x).0, lo, hi);
    let (best1, se1) = objective(sigma, x1);
    let value = best0 / best1;
    Ok(Penalty {
        definition,
        value,
        std_err: value * se1 / best1,
        optimum_unjittered_s: x0,
        optimum_jittered_s: x1,
    })
}

/// Time for the ensemble population to reach `1 - 1/e` of its pulse-end
/// value, on resonance with the mean frequency.
pub fn rise_time(s: &PulseSchedule, j: &JitterModel, mc: &MonteCarlo) -> Result<f64> {
    s.validate()?;
    let sigma = j.sigma()?;
    let draws = Draws::new(mc)?;
    let gamma = j.intrinsic_gamma;
    let offset = TWO_PI * (j.center_hz - s.mw_freq_hz);
    let n = |t: f64| {
        ensemble(sigma, &draws, &[t], |d, t| s.amplitude(gamma, offset + d, t).norm_sqr()).0[0]
    };
    let t_p = s.mw_duration_s;
    let target = (1.0 - (-1f64).exp()) * n(t_p);
    let (mut lo, mut hi) = (0.0, t_p);
    const SCAN: usize = 400;
    for i in 1..=SCAN {
        let t = t_p * i as f64 / SCAN as f64;
        if n(t) >= target {
            hi = t;
            lo = t_p * (i - 1) as f64 / SCAN as f64;
            break;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if n(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Energy decay rate (1/s) from a log-linear least-squares fit of
/// `n(t) - background` over points with positive excess population.
pub fn fit_decay_rate(points: &[(f64, f64)], background: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 - background > 0.0)
        .map(|&(t, n)| (t, (n - background).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::RankDeficient("decay fit needs two points above background".into()));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::RankDeficient("decay fit needs distinct times".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountModel {
    pub eta_chain: f64,
    pub dark_rate: f64,
    pub pulse_rate: f64,
}

/// Detected rate `pulse_rate * population * p_sw * eta_chain + dark_rate`.
pub fn click_rate(population: f64, p_sw: f64, c: &CountModel) -> Result<f64> {
    if !(population.is_finite() && population >= 0.0) {
        return Err(Error::domain(format!("population must be >= 0, got {population}")));
    }
    if !(c.eta_chain > 0.0 && c.eta_chain <= 1.0) {
        return Err(Error::domain(format!("eta_chain must lie in (0, 1], got {}", c.eta_chain)));
    }
    if !(c.dark_rate.is_finite() && c.dark_rate >= 0.0) {
        return Err(Error::domain(format!("dark_rate must be >= 0, got {}", c.dark_rate)));
    }
    if !(0.0..=1.0).contains(&p_sw) {
        return Err(Error::domain(format!("p_sw must lie in [0, 1], got {p_sw}")));
    }
    require_positive("pulse_rate", c.pulse_rate)?;
    Ok(c.pulse_rate * population * p_sw * c.eta_chain + c.dark_rate)
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
fn isotonic(y: &[f64]) -> Vec<f64> {
    // (value, weight) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, wb) = blocks[blocks.len() - 1];
            let (a, wa) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = wa + wb;
            blocks.push(((a * wa as f64 + b * wb as f64) / w as f64, w));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, w)| std::iter::repeat_n(v, w))
        .collect()
}

/// Thermal occupation after a readout pulse of device-referred energy `e_j`,
/// interpolated from a measured `(energy, n_th)` table made monotone in
/// energy. Queries outside the table are rejected.
pub fn thermal_vs_pulse_energy(table: &[(f64, f64)], e_j: f64) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::domain("thermal table is empty"));
    }
    if table.iter().any(|r| !(r.0.is_finite() && r.1.is_finite() && r.1 >= 0.0)) {
        return Err(Error::domain("thermal table entries must be finite with n_th >= 0"));
    }
    if table.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::domain("thermal table energies must be strictly increasing"));
    }
    let (min, max) = (table[0].0, table[table.len() - 1].0);
    if !(e_j >= min && e_j <= max) {
        return Err(Error::OutOfRange { value: e_j, min, max });
    }
    let n = isotonic(&table.iter().map(|r| r.1).collect::<Vec<_>>());
    let i = table.partition_point(|r| r.0 < e_j);
    if table[i].0 == e_j {
        return Ok(n[i]);
    }
    let (e0, e1) = (table[i - 1].0, table[i].0);
    let w = (e_j - e0) / (e1 - e0);
    Ok(n[i - 1] + w * (n[i] - n[i - 1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub factor: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyBudget {
    pub stages: Vec<Stage>,
    pub total: f64,
}

impl EfficiencyBudget {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        for s in &stages {
            if !(s.factor > 0.0 && s.factor <= 1.0) {
                return Err(Error::domain(format!(
                    "stage `{}` factor must lie in (0, 1], got {}",
                    s.name, s.factor
                )));
            }
        }
        let total = stages.iter().map(|s| s.factor).product();
        Ok(Self { stages, total })
    }
}

/// Where the budget should be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    /// Name of the mechanical mode used for conversion.
    pub mode: String,
    /// Readout pulse energy reaching the device.
    pub pulse_energy_j: f64,
    pub pulse_length_s: f64,
    /// Fridge temperature, used for kinetic-inductance tuning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    /// Measured electrical-to-mechanical efficiency; overrides the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_em_efficiency: Option<f64>,
    /// Jitter loading penalty used when the electrical stage is modeled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_penalty: Option<f64>,
}

pub const STAGE_ELECTRICAL: &str = "electrical-to-mechanical";
pub const STAGE_OPTICAL: &str = "mechanics-to-optics";

/// Stagewise product of the microwave-to-optics conversion efficiency.
pub fn efficiency_budget(device: &DeviceModel, op: &OperatingPoint) -> Result<EfficiencyBudget> {
    device.validate()?;
    let mode = device.mode(&op.mode)?;

    let electrical = match op.measured_em_efficiency {
        Some(v) => Stage {
            name: STAGE_ELECTRICAL.into(),
            factor: v,
            provenance: "measured value (operating_point.measured_em_efficiency)".into(),
        },
        None => {
            let penalty = op.jitter_penalty.ok_or_else(|| Error::MissingStage {
                stage: STAGE_ELECTRICAL.into(),
                reason: "no measured efficiency and no jitter penalty to model it".into(),
            })?;
            if !(penalty.is_finite() && penalty >= 1.0) {
                return Err(Error::MissingStage {
                    stage: STAGE_ELECTRICAL.into(),
                    reason: format!("jitter penalty must be >= 1, got {penalty}"),
                });
            }
            let matching = device.matching_at(op.temperature_k)?;
            let eta = electromechanical_efficiency(&matching, &device.bvd(mode), mode.f_m_hz)?;
            let line = device.losses.mw_line_transmission();
            Stage {
                name: STAGE_ELECTRICAL.into(),
                factor: eta * line / penalty,
                provenance: format!(
                    "circuit model {eta:.4e} x line {line:.4e} / jitter penalty {penalty:.4}"
                ),
            }
        }
    };

    let tone = DriveTone::red_sideband_pulse(
        &device.optical,
        mode,
        op.pulse_energy_j,
        op.pulse_length_s,
        1.0,
    );
    let p_sw = swap_probability(&device.optical, mode, &tone)?;
    let eta_o = device.optical.eta_o();
    let optical = Stage {
        name: STAGE_OPTICAL.into(),
        factor: mechanics_to_optics_efficiency(p_sw, eta_o)?,
        provenance: format!("p_sw {p_sw:.4e} x eta_o {eta_o:.4}"),
    };

    EfficiencyBudget::new(vec![electrical, optical])
}

/// Continuous efficiency per pump photon, `eta_em eta_o 4 C0 / (1 + C0)^2`.
pub fn per_pump_photon_efficiency(c0: f64, eta_em: f64, eta_o: f64) -> Result<f64> {
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(Error::domain(format!("C0 must be >= 0, got {c0}")));
    }
    for (name, v) in [("eta_em", eta_em), ("eta_o", eta_o)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    Ok(eta_em * eta_o * 4.0 * c0 / (1.0 + c0).powi(2))
}
