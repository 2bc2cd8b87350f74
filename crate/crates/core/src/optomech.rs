//! Optical cavity response and the optomechanical interaction.
//!
//! Rates are given as ordinary frequencies (`x_hz = x / 2pi`) and converted
//! to angular units internally.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::consts::HBAR;
use crate::error::{require_finite, require_positive, Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalCavity {
    pub f_c_hz: f64,
    /// Total linewidth (FWHM).
    pub kappa_hz: f64,
    /// External (waveguide) coupling rate.
    pub kappa_e_hz: f64,
}

impl OpticalCavity {
    pub fn validate(&self) -> Result<()> {
        require_positive("f_c_hz", self.f_c_hz)?;
        require_positive("kappa_hz", self.kappa_hz)?;
        require_positive("kappa_e_hz", self.kappa_e_hz)?;
        if self.kappa_e_hz > self.kappa_hz {
            return Err(Error::domain(format!(
                "kappa_e ({}) exceeds kappa ({})",
                self.kappa_e_hz, self.kappa_hz
            )));
        }
        Ok(())
    }

    pub fn omega_c(&self) -> f64 {
        TWO_PI * self.f_c_hz
    }
    pub fn kappa(&self) -> f64 {
        TWO_PI * self.kappa_hz
    }
    pub fn kappa_e(&self) -> f64 {
        TWO_PI * self.kappa_e_hz
    }
    pub fn kappa_i_hz(&self) -> f64 {
        self.kappa_hz - self.kappa_e_hz
    }
    /// Overcoupling ratio `kappa_e / kappa`.
    pub fn eta_o(&self) -> f64 {
        self.kappa_e_hz / self.kappa_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicalMode {
    pub name: String,
    pub f_m_hz: f64,
    /// Intrinsic (zero optical power) linewidth `gamma_m0 / 2pi`.
    pub linewidth_hz: f64,
    /// Single-photon optomechanical coupling `g0 / 2pi`.
    pub g0_hz: f64,
    /// Energy decay time, if measured in the time domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
}

impl MechanicalMode {
    pub fn validate(&self) -> Result<()> {
        require_positive("f_m_hz", self.f_m_hz)?;
        require_positive("linewidth_hz", self.linewidth_hz)?;
        require_positive("g0_hz", self.g0_hz)?;
        if let Some(t) = self.tau_s {
            require_positive("tau_s", t)?;
        }
        Ok(())
    }

    pub fn omega_m(&self) -> f64 {
        TWO_PI * self.f_m_hz
    }
    pub fn gamma_m0(&self) -> f64 {
        TWO_PI * self.linewidth_hz
    }
    pub fn g0(&self) -> f64 {
        TWO_PI * self.g0_hz
    }

    /// Lifetime-limited energy decay rate `1/tau` (rad/s), when a lifetime is known.
    pub fn intrinsic_gamma(&self) -> Option<f64> {
        self.tau_s.map(|t| 1.0 / t)
    }

    /// Sideband resolution `omega_m / kappa`.
    pub fn resolved_ratio(&self, c: &OpticalCavity) -> f64 {
        self.f_m_hz / c.kappa_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    Continuous { power_w: f64 },
    Pulsed { energy_j: f64, length_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveTone {
    pub f_l_hz: f64,
    pub drive: Drive,
    /// Fiber-to-waveguide power coupling; the device sees `coupling_eta` times the drive.
    pub coupling_eta: f64,
}

impl DriveTone {
    /// Pulse on the red sideband `omega_l = omega_c - omega_m`.
    pub fn red_sideband_pulse(
        c: &OpticalCavity,
        m: &MechanicalMode,
        energy_j: f64,
        length_s: f64,
        coupling_eta: f64,
    ) -> Self {
        Self {
            f_l_hz: c.f_c_hz - m.f_m_hz,
            drive: Drive::Pulsed { energy_j, length_s },
            coupling_eta,
        }
    }

    pub fn red_sideband_cw(
        c: &OpticalCavity,
        m: &MechanicalMode,
        power_w: f64,
        coupling_eta: f64,
    ) -> Self {
        Self {
            f_l_hz: c.f_c_hz - m.f_m_hz,
            drive: Drive::Continuous { power_w },
            coupling_eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("f_l_hz", self.f_l_hz)?;
        if !(self.coupling_eta > 0.0 && self.coupling_eta <= 1.0) {
            return Err(Error::domain(format!(
                "coupling_eta must lie in (0, 1], got {}",
                self.coupling_eta
            )));
        }
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be >= 0, got {v}")))
            }
        };
        match self.drive {
            Drive::Continuous { power_w } => nonneg("power_w", power_w),
            Drive::Pulsed { energy_j, length_s } => {
                nonneg("energy_j", energy_j)?;
                require_positive("length_s", length_s)
            }
        }
    }

    /// Laser detuning `Delta = omega_l - omega_c` (rad/s).
    pub fn detuning(&self, c: &OpticalCavity) -> f64 {
        TWO_PI * (self.f_l_hz - c.f_c_hz)
    }

    pub fn photon_energy(&self) -> f64 {
        HBAR * TWO_PI * self.f_l_hz
    }
}

/// Field reflection `r = 1 - kappa_e / (kappa/2 - 2 i Delta)` of one tone.
///
/// The factor of two on the detuning is kept as in the characterization
/// model this toolkit fits against; the S11 fit absorbs the convention into
/// the fitted rates.
pub fn cavity_reflection(c: &OpticalCavity, detuning_hz: f64) -> Complex64 {
    let delta = TWO_PI * detuning_hz;
    1.0 - c.kappa_e() / Complex64::new(c.kappa() / 2.0, -2.0 * delta)
}

/// Demodulated reflection at the modulation frequency for a carrier with two
/// equal in-phase sidebands at `carrier +- mod_freq`.
///
/// Normalized so a perfect mirror gives `S11 = 1`.
pub fn three_tone_s11(c: &OpticalCavity, carrier_detuning_hz: f64, mod_freq_hz: f64) -> Complex64 {
    let r0 = cavity_reflection(c, carrier_detuning_hz);
    let rp = cavity_reflection(c, carrier_detuning_hz + mod_freq_hz);
    let rm = cavity_reflection(c, carrier_detuning_hz - mod_freq_hz);
    0.5 * (r0.conj() * rp + r0 * rm.conj())
}

/// Steady-state intracavity photon number under a continuous drive.
pub fn intracavity_photons(c: &OpticalCavity, d: &DriveTone) -> Result<f64> {
    c.validate()?;
    d.validate()?;
    let Drive::Continuous { power_w } = d.drive else {
        return Err(Error::domain("intracavity_photons needs a continuous drive"));
    };
    let flux = power_w * d.coupling_eta / d.photon_energy();
    let delta = d.detuning(c);
    let half_kappa = c.kappa() / 2.0;
    Ok(flux * c.kappa_e() / (delta * delta + half_kappa * half_kappa))
}

/// `L_+ - L_-` with `L_pm = kappa / (kappa^2/4 + (Delta +- omega_m)^2)`, in seconds.
pub fn sideband_asymmetry_factor(c: &OpticalCavity, omega_m: f64, detuning: f64) -> f64 {
    let k = c.kappa();
    let l = |x: f64| k / (k * k / 4.0 + x * x);
    l(detuning + omega_m) - l(detuning - omega_m)
}

/// Total mechanical linewidth (Hz) with optomechanical damping:
/// `gamma_m = gamma_m0 + n_c g0^2 (L_+ - L_-)`.
pub fn optomechanical_damping(
    c: &OpticalCavity,
    m: &MechanicalMode,
    n_c: f64,
    detuning_hz: f64,
) -> Result<f64> {
    if !(n_c.is_finite() && n_c >= 0.0) {
        return Err(Error::domain(format!("n_c must be >= 0, got {n_c}")));
    }
    require_finite("detuning_hz", detuning_hz)?;
    let g0 = m.g0();
    let gamma =
        m.gamma_m0() + n_c * g0 * g0 * sideband_asymmetry_factor(c, m.omega_m(), TWO_PI * detuning_hz);
    Ok(gamma / TWO_PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cooperativity {
    /// Single-photon cooperativity `4 g0^2 / (kappa gamma_m0)`.
    pub c0: f64,
    /// Multiphoton cooperativity `n_c C0`.
    pub c_om: f64,
}

pub fn cooperativity(c: &OpticalCavity, m: &MechanicalMode, n_c: f64) -> Result<Cooperativity> {
    c.validate()?;
    m.validate()?;
    if !(n_c.is_finite() && n_c >= 0.0) {
        return Err(Error::domain(format!("n_c must be >= 0, got {n_c}")));
    }
    let g0 = m.g0();
    let c0 = 4.0 * g0 * g0 / (c.kappa() * m.gamma_m0());
    Ok(Cooperativity { c0, c_om: n_c * c0 })
}

/// Continuous conversion shape `C / (1 + C)^2`, maximal (1/4) at `C = 1`.
pub fn continuous_efficiency_shape(c_om: f64) -> f64 {
    c_om / ((1.0 + c_om) * (1.0 + c_om))
}

/// Probability that a red-detuned pulse swaps one phonon into the cavity:
/// `1 - exp(-4 eta_o g0^2 E_p / (hbar omega_l (omega_m^2 + (kappa/2)^2)))`,
/// with `E_p` the energy reaching the device (`coupling_eta` applied).
pub fn swap_probability(c: &OpticalCavity, m: &MechanicalMode, d: &DriveTone) -> Result<f64> {
    c.validate()?;
    m.validate()?;
    d.validate()?;
    let Drive::Pulsed { energy_j, .. } = d.drive else {
        return Err(Error::domain("swap_probability needs a pulsed drive"));
    };
    let e_device = energy_j * d.coupling_eta;
    Ok(-(-swap_exponent_per_joule(c, m, d.f_l_hz) * e_device).exp_m1())
}

/// Small-energy slope of the swap probability, per joule at the device.
pub fn swap_exponent_per_joule(c: &OpticalCavity, m: &MechanicalMode, f_l_hz: f64) -> f64 {
    let g0 = m.g0();
    let wm = m.omega_m();
    let hk = c.kappa() / 2.0;
    4.0 * c.eta_o() * g0 * g0 / (HBAR * TWO_PI * f_l_hz * (wm * wm + hk * hk))
}

/// Device-referred pulse energy needed for a target swap probability.
pub fn energy_for_swap_probability(
    c: &OpticalCavity,
    m: &MechanicalMode,
    f_l_hz: f64,
    p_sw: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&p_sw) {
        return Err(Error::domain(format!("p_sw must lie in [0, 1), got {p_sw}")));
    }
    Ok(-(-p_sw).ln_1p() / swap_exponent_per_joule(c, m, f_l_hz))
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Mechanics-to-optics efficiency `p_sw * eta_o`.
pub fn mechanics_to_optics_efficiency(p_sw: f64, eta_o: f64) -> Result<f64> {
    unit_interval("p_sw", p_sw)?;
    unit_interval("eta_o", eta_o)?;
    Ok(p_sw * eta_o)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StokesLeakage {
    /// Phonons added by unwanted Stokes scattering per red pulse.
    pub leakage: f64,
    pub resolved_ratio: f64,
}

/// Stokes scattering leaks `0.12 p_sw` phonons at `omega_m/kappa ~ 0.67`.
pub fn stokes_leakage(p_sw: f64, f_m_hz: f64, kappa_hz: f64) -> Result<StokesLeakage> {
    unit_interval("p_sw", p_sw)?;
    require_positive("f_m_hz", f_m_hz)?;
    require_positive("kappa_hz", kappa_hz)?;
    Ok(StokesLeakage {
        leakage: 0.12 * p_sw,
        resolved_ratio: f_m_hz / kappa_hz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Occupation {
    pub n_th: f64,
    /// One standard deviation from Poisson statistics on both count totals.
    pub sigma: f64,
}

/// Sideband-asymmetry thermometry: `n = G_R / (G_B - G_R)` from
/// background-subtracted red (anti-Stokes) and blue (Stokes) counts.
pub fn thermal_occupation(red_counts: f64, blue_counts: f64) -> Result<Occupation> {
    if !(red_counts.is_finite() && red_counts >= 0.0 && blue_counts.is_finite()) {
        return Err(Error::domain(format!(
            "count totals must be finite with red >= 0 (red {red_counts}, blue {blue_counts})"
        )));
    }
    if blue_counts <= red_counts {
        return Err(Error::InconsistentAsymmetry {
            red: red_counts,
            blue: blue_counts,
        });
    }
    let diff = blue_counts - red_counts;
    let n_th = red_counts / diff;
    // dn/dR = B/(B-R)^2, dn/dB = -R/(B-R)^2, var(N) = N.
    let sigma = (blue_counts * blue_counts * red_counts + red_counts * red_counts * blue_counts)
        .sqrt()
        / (diff * diff);
    Ok(Occupation { n_th, sigma })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn reference_cavity() -> OpticalCavity {
        OpticalCavity {
            f_c_hz: 192.743e12,
            kappa_hz: 4.17e9,
            kappa_e_hz: 2.54e9,
        }
    }

    pub(crate) fn mode_2799() -> MechanicalMode {
        MechanicalMode {
            name: "2.799GHz".into(),
            f_m_hz: 2.799e9,
            linewidth_hz: 67e3,
            g0_hz: 700e3,
            tau_s: Some(61.4e-6),
        }
    }

    fn mode_2790() -> MechanicalMode {
        MechanicalMode {
            name: "2.790GHz".into(),
            f_m_hz: 2.790e9,
            linewidth_hz: 191e3,
            g0_hz: 272e3,
            tau_s: None,
        }
    }

    #[test]
    fn reflection_special_cases() {
        let mut c = reference_cavity();
        c.kappa_e_hz = c.kappa_hz / 2.0;
        assert!(cavity_reflection(&c, 0.0).norm() < 1e-15);
        c.kappa_e_hz = c.kappa_hz;
        assert!((cavity_reflection(&c, 0.0) + 1.0).norm() < 1e-15);
        let r = cavity_reflection(&reference_cavity(), 0.0);
        assert!((r.re - (1.0 - 2.0 * 2.54 / 4.17)).abs() < 1e-14 && r.im.abs() < 1e-15);
        assert!((r.re + 0.2182).abs() < 1e-4);
        assert!((cavity_reflection(&reference_cavity(), 1e15) - 1.0).norm() < 1e-5);
    }

    #[test]
    fn reflection_minimum_at_resonance() {
        let c = reference_cavity();
        let r0 = cavity_reflection(&c, 0.0).norm_sqr();
        for i in 1..200 {
            let d = i as f64 * 1e8;
            let a = cavity_reflection(&c, d).norm_sqr();
            let b = cavity_reflection(&c, -d).norm_sqr();
            assert!(a > r0 && b > r0);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn three_tone_limits() {
        let c = reference_cavity();
        let far = three_tone_s11(&c, 8e9, 1e16);
        let bg = cavity_reflection(&c, 8e9).re;
        assert!((far.re - bg).abs() < 1e-6 && far.im.abs() < 1e-6);
        let mut dark = c;
        dark.kappa_e_hz = 0.0;
        for f in [4e9, 8e9, 12e9] {
            assert!((three_tone_s11(&dark, 8e9, f) - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn three_tone_dip_for_overcoupled_device() {
        let c = reference_cavity();
        let carrier = 8e9;
        let n = 8001;
        let (mut fmin, mut smin) = (0.0, f64::MAX);
        for i in 0..n {
            let f = 4e9 + 8e9 * i as f64 / (n - 1) as f64;
            let s = three_tone_s11(&c, carrier, f).norm();
            if s < smin {
                smin = s;
                fmin = f;
            }
        }
        assert!(smin < 0.5, "dip depth {smin}");
        assert!((fmin - carrier).abs() < 0.05 * c.kappa_hz, "dip at {fmin}");
    }

    #[test]
    fn photon_numbers() {
        let c = reference_cavity();
        let m = mode_2799();
        let d = DriveTone::red_sideband_cw(&c, &m, 1e-6, 1.0);
        let n = intracavity_photons(&c, &d).unwrap();
        // Oracle: hbar omega_l = 1.2771e-19 J, Delta^2 + (kappa/2)^2 = 4.8091e20 s^-2.
        let oracle = 1e-6 / 1.27711e-19 * (TWO_PI * 2.54e9) / 4.80912e20;
        assert!((n / oracle - 1.0).abs() < 1e-4, "{n} vs {oracle}");
        assert!((n / 260.0 - 1.0).abs() < 0.02);
        let mut d0 = d;
        d0.f_l_hz = c.f_c_hz;
        let ratio = intracavity_photons(&c, &d0).unwrap() / n;
        let hk = 4.17e9 / 2.0;
        let expected = (2.799e9f64.powi(2) + hk * hk) / (hk * hk);
        assert!((ratio / expected - 1.0).abs() < 1e-4);
        assert!((ratio - 2.80).abs() < 0.01);
        let mut off = d;
        off.drive = Drive::Continuous { power_w: 0.0 };
        assert_eq!(intracavity_photons(&c, &off).unwrap(), 0.0);
    }

    #[test]
    fn damping_is_linear_and_positive_on_red_sideband() {
        let c = reference_cavity();
        let m = mode_2799();
        let det = -m.f_m_hz;
        assert_eq!(optomechanical_damping(&c, &m, 0.0, det).unwrap(), 67e3);
        let g: Vec<f64> = [0.0, 500.0, 1000.0]
            .iter()
            .map(|&n| optomechanical_damping(&c, &m, n, det).unwrap())
            .collect();
        assert!(g[2] > g[0]);
        assert!(((g[2] - g[1]) - (g[1] - g[0])).abs() < 1e-12 * g[2]);
        assert_eq!(optomechanical_damping(&c, &m, 1000.0, 0.0).unwrap(), 67e3);
    }

    #[test]
    fn cooperativities_match_quoted_values() {
        let c = reference_cavity();
        let a = cooperativity(&c, &mode_2799(), 148.0).unwrap();
        assert!((a.c0 / 7.0e-3 - 1.0).abs() < 0.03, "C0 = {}", a.c0);
        assert!((a.c_om / 1.04 - 1.0).abs() < 0.03);
        let b = cooperativity(&c, &mode_2790(), 0.0).unwrap();
        assert!((b.c0 / 3.7e-4 - 1.0).abs() < 0.05, "C0 = {}", b.c0);
    }

    #[test]
    fn efficiency_shape_peaks_at_unity() {
        assert_eq!(continuous_efficiency_shape(1.0), 0.25);
        assert_eq!(continuous_efficiency_shape(0.0), 0.0);
        for c in [1.04, 1.01] {
            assert!((continuous_efficiency_shape(c) / 0.25 - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn swap_probability_at_operating_point() {
        let c = reference_cavity();
        let m = mode_2799();
        let d = DriveTone::red_sideband_pulse(&c, &m, 40e-15, 40e-9, 1.0);
        let p = swap_probability(&c, &m, &d).unwrap();
        assert!((p / 0.031 - 1.0).abs() < 0.1, "p_sw = {p}");
        let photons = 40e-15 / d.photon_energy();
        assert!((photons / 314e3 - 1.0).abs() < 0.01);
        // Fiber-side energy is reduced by the coupling efficiency.
        let fiber = DriveTone::red_sideband_pulse(&c, &m, 80e-15, 40e-9, 0.5);
        assert!((swap_probability(&c, &m, &fiber).unwrap() - p).abs() < 1e-15);
        let zero = DriveTone::red_sideband_pulse(&c, &m, 0.0, 40e-9, 1.0);
        assert_eq!(swap_probability(&c, &m, &zero).unwrap(), 0.0);
    }

    #[test]
    fn swap_probability_small_energy_slope() {
        let c = reference_cavity();
        let m = mode_2799();
        let slope = swap_exponent_per_joule(&c, &m, c.f_c_hz - m.f_m_hz);
        let p = |e: f64| {
            swap_probability(&c, &m, &DriveTone::red_sideband_pulse(&c, &m, e, 40e-9, 1.0)).unwrap()
        };
        assert!((p(2e-15) / p(1e-15) - 2.0).abs() < 0.06);
        let e = 1e-15;
        assert!(p(e) < 0.01);
        assert!((p(e) / (slope * e) - 1.0).abs() < 0.01);
        let e_back = energy_for_swap_probability(&c, &m, c.f_c_hz - m.f_m_hz, p(40e-15)).unwrap();
        assert!((e_back / 40e-15 - 1.0).abs() < 1e-12);
        assert!(p(1e-9) > 0.999_999);
    }

    #[test]
    fn optics_efficiency_and_leakage() {
        assert!((mechanics_to_optics_efficiency(0.032, 0.61).unwrap() - 1.952e-2).abs() < 1e-12);
        assert_eq!(mechanics_to_optics_efficiency(1.0, 0.61).unwrap(), 0.61);
        assert!(mechanics_to_optics_efficiency(1.2, 0.61).is_err());
        let s = stokes_leakage(0.032, 2.799e9, 4.17e9).unwrap();
        assert!((s.leakage - 3.84e-3).abs() < 1e-12);
        assert!((s.resolved_ratio - 0.671).abs() < 1e-3);
        assert_eq!(stokes_leakage(0.0, 2.799e9, 4.17e9).unwrap().leakage, 0.0);
    }

    #[test]
    fn thermometry() {
        assert_eq!(thermal_occupation(1000.0, 2000.0).unwrap().n_th, 1.0);
        assert_eq!(thermal_occupation(0.0, 10.0).unwrap().n_th, 0.0);
        // n/(n+1) at n = 0.55.
        let ratio: f64 = 0.55 / 1.55;
        assert!((ratio - 0.3548).abs() < 1e-4);
        let o = thermal_occupation(ratio * 1e4, 1e4).unwrap();
        assert!((o.n_th - 0.55).abs() < 1e-12);
        assert!(o.sigma > 0.0);
        assert!(matches!(
            thermal_occupation(10.0, 10.0),
            Err(Error::InconsistentAsymmetry { .. })
        ));
    }

    #[test]
    fn invalid_cavity() {
        let mut c = reference_cavity();
        c.kappa_e_hz = 5e9;
        assert!(c.validate().is_err());
        assert!(cooperativity(&c, &mode_2799(), 1.0).is_err());
    }
}
