//! Lumped-element model of the electrical side of the transducer.
//!
//! Topology, from the source towards the mechanics:
//!
//! ```text
//!  Z_src ── R_loss ── L_match ──┬───────────┬──────────────┐
//!                               │           │              │
//!                            C_match      C_res      R_m─L_m─C_m
//!                               │           │              │
//!  ─────────────────────────────┴───────────┴──────────────┘
//! ```
//!
//! `C_res` with the series motional branch is the Butterworth-van Dyke (BVD)
//! model of the piezo resonator. Power dissipated in `R_m` is the power
//! converted into mechanical motion.
//!
//! All public functions take ordinary frequency in hertz.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::consts::K_B;
use crate::error::{require_positive, Error, Result};

/// BVD parameters of one piezo-mechanical mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvdParams {
    /// Static (plate) capacitance of the piezo resonator.
    pub c_res_f: f64,
    /// Electromechanical coupling coefficient `C_m / (C_m + C_res)`.
    pub k_eff_sq: f64,
    /// Mechanical resonance frequency.
    pub f_m_hz: f64,
    /// Mechanical energy linewidth `gamma_m / 2pi`.
    pub linewidth_hz: f64,
}

impl BvdParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("c_res_f", self.c_res_f)?;
        require_positive("f_m_hz", self.f_m_hz)?;
        require_positive("linewidth_hz", self.linewidth_hz)?;
        if !(self.k_eff_sq > 0.0 && self.k_eff_sq < 1.0) {
            return Err(Error::domain(format!(
                "k_eff_sq must lie in (0, 1), got {}",
                self.k_eff_sq
            )));
        }
        Ok(())
    }

    pub fn omega_m(&self) -> f64 {
        2.0 * PI * self.f_m_hz
    }

    pub fn gamma_m(&self) -> f64 {
        2.0 * PI * self.linewidth_hz
    }

    /// Mechanical quality factor `omega_m / gamma_m`.
    pub fn quality_factor(&self) -> f64 {
        self.f_m_hz / self.linewidth_hz
    }
}

/// Series motional branch derived from [`BvdParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MotionalBranch {
    pub r_m: f64,
    pub l_m: f64,
    pub c_m: f64,
}

impl MotionalBranch {
    fn impedance(&self, omega: f64, omega_m: f64) -> Complex64 {
        // omega*L_m - 1/(omega*C_m) written so the near-resonance
        // cancellation happens in (omega - omega_m).
        let x = self.l_m * (omega - omega_m) * (omega + omega_m) / omega;
        Complex64::new(self.r_m, x)
    }
}

/// On-chip LC matching resonator plus the source it is driven from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingParams {
    pub l_match_h: f64,
    pub c_match_f: f64,
    pub r_loss_ohm: f64,
    #[serde(default = "default_z_source")]
    pub z_source_ohm: f64,
}

pub(crate) fn default_z_source() -> f64 {
    50.0
}

impl MatchingParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("l_match_h", self.l_match_h)?;
        require_positive("c_match_f", self.c_match_f)?;
        require_positive("z_source_ohm", self.z_source_ohm)?;
        if !(self.r_loss_ohm.is_finite() && self.r_loss_ohm >= 0.0) {
            return Err(Error::domain(format!(
                "r_loss_ohm must be finite and >= 0, got {}",
                self.r_loss_ohm
            )));
        }
        Ok(())
    }

    /// Characteristic impedance `sqrt(L/C)` of the matching resonator.
    pub fn characteristic_impedance(&self) -> f64 {
        (self.l_match_h / self.c_match_f).sqrt()
    }

    pub fn with_inductance(self, l_match_h: f64) -> Self {
        Self { l_match_h, ..self }
    }
}

/// Superconducting film inductance following the BCS gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticInductanceModel {
    pub l_geometric_h: f64,
    /// Kinetic inductance at zero temperature.
    pub l_kinetic0_h: f64,
    pub t_c_k: f64,
}

impl KineticInductanceModel {
    pub fn validate(&self) -> Result<()> {
        require_positive("l_geometric_h", self.l_geometric_h)?;
        if !(self.l_kinetic0_h.is_finite() && self.l_kinetic0_h >= 0.0) {
            return Err(Error::domain(format!(
                "l_kinetic0_h must be finite and >= 0, got {}",
                self.l_kinetic0_h
            )));
        }
        require_positive("t_c_k", self.t_c_k)
    }
}

/// `R_m = (gamma_m / omega_m^2) (1/k^2 - 1) / C_res`, with `C_m` and `L_m`
/// fixed by `k_eff^2 = C_m/(C_m + C_res)` and `omega_m = 1/sqrt(L_m C_m)`.
pub fn bvd_motional_branch(p: &BvdParams) -> Result<MotionalBranch> {
    p.validate()?;
    let w = p.omega_m();
    let c_m = p.c_res_f * p.k_eff_sq / (1.0 - p.k_eff_sq);
    let l_m = 1.0 / (w * w * c_m);
    let r_m = p.gamma_m() / (w * w) * (1.0 / p.k_eff_sq - 1.0) / p.c_res_f;
    Ok(MotionalBranch { r_m, l_m, c_m })
}

fn check_freq(freq_hz: f64) -> Result<f64> {
    if freq_hz.is_finite() && freq_hz > 0.0 {
        Ok(2.0 * PI * freq_hz)
    } else {
        Err(Error::domain(format!(
            "frequency must be finite and > 0 (capacitive open at DC), got {freq_hz}"
        )))
    }
}

/// Impedances along the network at one frequency.
#[derive(Debug, Clone, Copy)]
struct NetworkState {
    z_in: Complex64,
    z_node: Complex64,
    z_motional: Complex64,
}

fn network(m: &MatchingParams, b: &BvdParams, freq_hz: f64) -> Result<NetworkState> {
    m.validate()?;
    let branch = bvd_motional_branch(b)?;
    let w = check_freq(freq_hz)?;
    let j = Complex64::i();
    let z_motional = branch.impedance(w, b.omega_m());
    let y_node = j * w * (b.c_res_f + m.c_match_f) + z_motional.inv();
    let z_node = y_node.inv();
    let z_in = m.r_loss_ohm + j * w * m.l_match_h + z_node;
    Ok(NetworkState {
        z_in,
        z_node,
        z_motional,
    })
}

/// Input impedance of the passive network seen by the source (source excluded).
pub fn input_impedance(m: &MatchingParams, b: &BvdParams, freq_hz: f64) -> Result<Complex64> {
    Ok(network(m, b, freq_hz)?.z_in)
}

/// Reflection coefficient `(Z - Z_src)/(Z + Z_src)`.
pub fn electrical_s11(m: &MatchingParams, b: &BvdParams, freq_hz: f64) -> Result<Complex64> {
    let z = input_impedance(m, b, freq_hz)?;
    Ok((z - m.z_source_ohm) / (z + m.z_source_ohm))
}

/// Load resistance that a resonator of impedance `z_match` matches to `z_source`.
pub fn matched_load(z_match_ohm: f64, z_source_ohm: f64) -> Result<f64> {
    require_positive("z_match_ohm", z_match_ohm)?;
    require_positive("z_source_ohm", z_source_ohm)?;
    Ok(z_match_ohm * z_match_ohm / z_source_ohm)
}

/// Where the available source power goes, normalized to unit available power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSplit {
    pub reflected: f64,
    pub loss: f64,
    pub motional: f64,
}

/// Power bookkeeping against the available power `|V|^2 / (8 Z_src)`.
///
/// Loss and motional power are computed from branch currents, not from `|Gamma|`.
pub fn power_split(m: &MatchingParams, b: &BvdParams, freq_hz: f64) -> Result<PowerSplit> {
    let st = network(m, b, freq_hz)?;
    let z_src = m.z_source_ohm;
    // Source EMF of 1 V peak; available power 1/(8 Z_src).
    let p_avail = 1.0 / (8.0 * z_src);
    let i_series = Complex64::new(1.0, 0.0) / (z_src + st.z_in);
    let v_node = i_series * st.z_node;
    let i_motional = v_node / st.z_motional;
    let loss = 0.5 * i_series.norm_sqr() * m.r_loss_ohm / p_avail;
    let motional = 0.5 * i_motional.norm_sqr() * st.z_motional.re / p_avail;
    let gamma = (st.z_in - z_src) / (st.z_in + z_src);
    Ok(PowerSplit {
        reflected: gamma.norm_sqr(),
        loss,
        motional,
    })
}

/// Fraction of the available source power dissipated in `R_m`.
pub fn electromechanical_efficiency(
    m: &MatchingParams,
    b: &BvdParams,
    freq_hz: f64,
) -> Result<f64> {
    Ok(power_split(m, b, freq_hz)?.motional)
}

/// Series resonance of `L_match` with the total node capacitance.
pub fn matching_resonance_hz(m: &MatchingParams, b: &BvdParams) -> f64 {
    1.0 / (2.0 * PI * (m.l_match_h * (m.c_match_f + b.c_res_f)).sqrt())
}

/// Loaded quality factor of the matching resonance when the motional branch
/// is far off resonance: `sqrt(L/C_tot) / (Z_src + R_loss)`.
pub fn loaded_quality_factor(m: &MatchingParams, b: &BvdParams) -> f64 {
    (m.l_match_h / (m.c_match_f + b.c_res_f)).sqrt() / (m.z_source_ohm + m.r_loss_ohm)
}

/// Lossless L-network (series L, shunt C) that conjugate-matches the BVD
/// load at `freq_hz` to `z_source_ohm`.
pub fn conjugate_match(b: &BvdParams, freq_hz: f64, z_source_ohm: f64) -> Result<MatchingParams> {
    require_positive("z_source_ohm", z_source_ohm)?;
    let branch = bvd_motional_branch(b)?;
    let w = check_freq(freq_hz)?;
    let z_mot = branch.impedance(w, b.omega_m());
    let y_mot = z_mot.inv();
    let g = y_mot.re;
    if g <= 0.0 {
        return Err(Error::domain("motional branch has no conductance"));
    }
    // Pick total susceptance B so that Re[1/(G + jB)] = Z_src.
    let b_total = (g / z_source_ohm - g * g).sqrt();
    if !b_total.is_finite() {
        return Err(Error::domain(format!(
            "load conductance {g:.3e} S too large to match down to {z_source_ohm} ohm with an L-network"
        )));
    }
    let c_match = (b_total - y_mot.im) / w - b.c_res_f;
    if c_match <= 0.0 {
        return Err(Error::domain(
            "required shunt capacitance is below the plate capacitance",
        ));
    }
    let z_node = Complex64::new(g, b_total).inv();
    let l_match = -z_node.im / w;
    Ok(MatchingParams {
        l_match_h: l_match,
        c_match_f: c_match,
        r_loss_ohm: 0.0,
        z_source_ohm,
    })
}

/// Outcome of a grid search over matching-network values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchDesign {
    pub l_match_h: f64,
    pub c_match_f: f64,
    pub s11_magnitude: f64,
    pub efficiency: f64,
}

/// Exhaustive search over `l_grid x c_grid` for the smallest `|Gamma|` at `freq_hz`.
pub fn match_design(
    template: &MatchingParams,
    b: &BvdParams,
    freq_hz: f64,
    l_grid: &[f64],
    c_grid: &[f64],
) -> Result<MatchDesign> {
    if l_grid.is_empty() || c_grid.is_empty() {
        return Err(Error::domain("match_design needs non-empty L and C grids"));
    }
    let mut best: Option<MatchDesign> = None;
    for &l in l_grid {
        for &c in c_grid {
            let m = MatchingParams {
                l_match_h: l,
                c_match_f: c,
                ..*template
            };
            let s = electrical_s11(&m, b, freq_hz)?.norm();
            if best.is_none_or(|d| s < d.s11_magnitude) {
                best = Some(MatchDesign {
                    l_match_h: l,
                    c_match_f: c,
                    s11_magnitude: s,
                    efficiency: electromechanical_efficiency(&m, b, freq_hz)?,
                });
            }
        }
    }
    Ok(best.expect("grids are non-empty"))
}

/// `k_eff^2 = (f_p^2 - f_s^2) / f_p^2` from series and parallel resonances.
pub fn keff_from_admittance(f_s_hz: f64, f_p_hz: f64) -> Result<f64> {
    require_positive("f_s_hz", f_s_hz)?;
    require_positive("f_p_hz", f_p_hz)?;
    if f_s_hz > f_p_hz {
        return Err(Error::domain(format!(
            "series resonance {f_s_hz} Hz above parallel resonance {f_p_hz} Hz"
        )));
    }
    let ratio = f_s_hz / f_p_hz;
    Ok((1.0 - ratio) * (1.0 + ratio))
}

/// Normalized BCS gap `Delta(T)/Delta(0)`: `1.74 sqrt(1 - T/T_c)` clipped at 1.
pub fn normalized_gap(t_k: f64, t_c_k: f64) -> f64 {
    (1.74 * (1.0 - t_k / t_c_k).sqrt()).min(1.0)
}

/// Kinetic-inductance enhancement `L_k(T)/L_k(0) = 1/(delta tanh(Delta/2k_BT))`.
pub(crate) fn kinetic_factor(t_k: f64, t_c_k: f64) -> f64 {
    let delta = normalized_gap(t_k, t_c_k);
    let gap0 = 1.764 * K_B * t_c_k;
    let arg = delta * gap0 / (2.0 * K_B * t_k);
    1.0 / (delta * arg.tanh())
}

/// Total inductance `L_geo + L_k(T)` of the matching coil.
pub fn kinetic_inductance_at(k: &KineticInductanceModel, t_k: f64) -> Result<f64> {
    k.validate()?;
    if !(t_k.is_finite() && t_k >= 0.0) {
        return Err(Error::domain(format!("temperature must be >= 0 K, got {t_k}")));
    }
    if t_k >= k.t_c_k {
        return Err(Error::domain(format!(
            "temperature {t_k} K is at or above T_c = {} K (normal state)",
            k.t_c_k
        )));
    }
    Ok(k.l_geometric_h + k.l_kinetic0_h * kinetic_factor(t_k, k.t_c_k))
}

/// Matching resonance `1/(2 pi sqrt(L(T) C))` on a temperature grid.
pub fn resonance_vs_temperature(
    k: &KineticInductanceModel,
    capacitance_f: f64,
    t_grid_k: &[f64],
) -> Result<Vec<(f64, f64)>> {
    require_positive("capacitance_f", capacitance_f)?;
    t_grid_k
        .iter()
        .map(|&t| {
            let l = kinetic_inductance_at(k, t)?;
            Ok((t, 1.0 / (2.0 * PI * (l * capacitance_f).sqrt())))
        })
        .collect()
}

/// Solve for `(L_geo, L_k0)` so the resonance sits at `f_base_hz` at zero
/// temperature and at `f_warm_hz` at `t_warm_k`, for a given `T_c`.
pub fn calibrate_kinetic_inductance(
    f_base_hz: f64,
    f_warm_hz: f64,
    t_warm_k: f64,
    t_c_k: f64,
    capacitance_f: f64,
) -> Result<KineticInductanceModel> {
    require_positive("f_base_hz", f_base_hz)?;
    require_positive("f_warm_hz", f_warm_hz)?;
    require_positive("t_warm_k", t_warm_k)?;
    require_positive("capacitance_f", capacitance_f)?;
    if t_warm_k >= t_c_k {
        return Err(Error::domain("calibration temperature must be below T_c"));
    }
    if f_warm_hz >= f_base_hz {
        return Err(Error::domain(
            "kinetic inductance can only red-shift the resonance on warming",
        ));
    }
    let l_of = |f: f64| 1.0 / ((2.0 * PI * f).powi(2) * capacitance_f);
    let l0 = l_of(f_base_hz);
    let lw = l_of(f_warm_hz);
    let l_k0 = (lw - l0) / (kinetic_factor(t_warm_k, t_c_k) - 1.0);
    let l_g = l0 - l_k0;
    if l_g <= 0.0 {
        return Err(Error::domain(format!(
            "a shift of {:.3e} Hz at {t_warm_k} K needs a kinetic fraction above 100% for T_c = {t_c_k} K",
            f_base_hz - f_warm_hz
        )));
    }
    Ok(KineticInductanceModel {
        l_geometric_h: l_g,
        l_kinetic0_h: l_k0,
        t_c_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_bvd(q: f64) -> BvdParams {
        BvdParams {
            c_res_f: 0.17e-15,
            k_eff_sq: 1.59e-6,
            f_m_hz: 2.8e9,
            linewidth_hz: 2.8e9 / q,
        }
    }

    fn test_matching() -> MatchingParams {
        MatchingParams {
            l_match_h: 180e-9,
            c_match_f: 19e-15,
            r_loss_ohm: 3.0,
            z_source_ohm: 50.0,
        }
    }

    #[test]
    fn motional_resistance_matches_quoted_value() {
        let r = bvd_motional_branch(&reference_bvd(1e5)).unwrap().r_m;
        assert!((r / 2.1e6 - 1.0).abs() < 0.01, "R_m = {r}");
    }

    #[test]
    fn motional_resistance_is_linear_in_linewidth() {
        let r1 = bvd_motional_branch(&reference_bvd(1e5)).unwrap().r_m;
        let r2 = bvd_motional_branch(&reference_bvd(2e5)).unwrap().r_m;
        // Direct evaluation of the closed form at Q = 2e5.
        let w = 2.0 * PI * 2.8e9;
        let oracle = (w / 2e5) / (w * w) * (1.0 / 1.59e-6 - 1.0) / 0.17e-15;
        assert!((r2 / oracle - 1.0).abs() < 1e-12);
        assert!((r1 / r2 - 2.0).abs() < 1e-12);
        assert!((r2 / 1.05e6 - 1.0).abs() < 0.01);
    }

    #[test]
    fn bvd_round_trip() {
        let p = reference_bvd(1e5);
        let br = bvd_motional_branch(&p).unwrap();
        let k2 = br.c_m / (br.c_m + p.c_res_f);
        assert!((k2 / p.k_eff_sq - 1.0).abs() < 1e-12);
        let w = 1.0 / (br.l_m * br.c_m).sqrt();
        assert!((w / p.omega_m() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bvd_rejects_bad_inputs() {
        let mut p = reference_bvd(1e5);
        p.k_eff_sq = 1.0;
        assert!(bvd_motional_branch(&p).is_err());
        p = reference_bvd(1e5);
        p.c_res_f = f64::NAN;
        assert!(bvd_motional_branch(&p).is_err());
        p = reference_bvd(1e5);
        p.linewidth_hz = -1.0;
        assert!(bvd_motional_branch(&p).is_err());
    }

    #[test]
    fn zero_frequency_is_rejected() {
        assert!(input_impedance(&test_matching(), &reference_bvd(1e5), 0.0).is_err());
    }

    #[test]
    fn low_frequency_limit_is_capacitive() {
        let m = test_matching();
        let b = reference_bvd(1e5);
        let f = 1e6;
        let z = input_impedance(&m, &b, f).unwrap();
        let c_tot = m.c_match_f + b.c_res_f;
        let expected = 1.0 / (2.0 * PI * f * c_tot);
        assert!((z.arg().to_degrees() + 90.0).abs() < 0.1);
        assert!((z.norm() / expected - 1.0).abs() < 1e-3);
        let g = electrical_s11(&m, &b, 1.0).unwrap();
        assert!((g - 1.0).norm() < 1e-6);
    }

    #[test]
    fn bare_lc_resonance_when_motional_branch_decoupled() {
        let mut b = reference_bvd(1e5);
        b.k_eff_sq = 1e-14;
        let m = test_matching();
        let f0 = matching_resonance_hz(&m, &b);
        let x = |f: f64| input_impedance(&m, &b, f).unwrap().im;
        assert!(x(f0).abs() < 1e-6 * m.characteristic_impedance());
        assert!(x(f0 * 0.999) < 0.0 && x(f0 * 1.001) > 0.0);
        // |Z| is minimal (series resonance) at f0.
        let zmin = input_impedance(&m, &b, f0).unwrap().norm();
        for f in [f0 * 0.99, f0 * 1.01] {
            assert!(input_impedance(&m, &b, f).unwrap().norm() > zmin);
        }
    }

    #[test]
    fn loaded_q_near_sixty_two() {
        let m = test_matching();
        let mut b = reference_bvd(1e5);
        b.f_m_hz = 2.5e9;
        b.linewidth_hz = 2.5e9 / 1e5;
        let q = loaded_quality_factor(&m, &b);
        // Oracle: numerical 3 dB points, |X| = Z_src + R.
        let f0 = matching_resonance_hz(&m, &b);
        let half = |target: f64, lo: f64, hi: f64| {
            let g = |f: f64| {
                let z = input_impedance(&m, &b, f).unwrap();
                z.im - target * (z.re + m.z_source_ohm)
            };
            let (mut a, mut c) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + c);
                if g(a) * g(mid) <= 0.0 {
                    c = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + c)
        };
        let f_lo = half(-1.0, f0 * 0.95, f0);
        let f_hi = half(1.0, f0, f0 * 1.05);
        let q_num = f0 / (f_hi - f_lo);
        assert!((q_num / q - 1.0).abs() < 0.01, "{q_num} vs {q}");
        assert!((q / 62.0 - 1.0).abs() < 0.1, "Q = {q}");
    }

    #[test]
    fn matched_load_values() {
        assert!((matched_load(3.1e3, 50.0).unwrap() - 192.2e3).abs() < 1.0);
        assert_eq!(matched_load(50.0, 50.0).unwrap(), 50.0);
        let z = (180e-9_f64 / 19e-15).sqrt();
        assert!((z - 3078.0).abs() < 1.0);
        assert!((matched_load(z, 50.0).unwrap() / 189.47e3 - 1.0).abs() < 1e-3);
        assert!(matched_load(0.0, 50.0).is_err());
    }

    #[test]
    fn conjugate_match_delivers_all_power() {
        let b = reference_bvd(1e5);
        let m = conjugate_match(&b, b.f_m_hz, 50.0).unwrap();
        let eta = electromechanical_efficiency(&m, &b, b.f_m_hz).unwrap();
        assert!((eta - 1.0).abs() < 1e-9, "eta = {eta}");
        assert!(electrical_s11(&m, &b, b.f_m_hz).unwrap().norm() < 1e-6);
    }

    #[test]
    fn no_transduction_without_coupling() {
        let mut b = reference_bvd(1e5);
        b.k_eff_sq = 1e-300;
        let eta = electromechanical_efficiency(&test_matching(), &b, 2.8e9).unwrap();
        assert!(eta < 1e-200);
    }

    #[test]
    fn detuned_matching_costs_efficiency() {
        // Intrinsic-linewidth mode at 2.799 GHz, matching tuned onto it or 50 MHz above.
        let b = BvdParams {
            c_res_f: 0.17e-15,
            k_eff_sq: 1.59e-6,
            f_m_hz: 2.799e9,
            linewidth_hz: 2.59e3,
        };
        let base = MatchingParams {
            l_match_h: 1.0,
            c_match_f: 19e-15,
            r_loss_ohm: 3.0,
            z_source_ohm: 50.0,
        };
        let tune = |f: f64| {
            base.with_inductance(1.0 / ((2.0 * PI * f).powi(2) * (base.c_match_f + b.c_res_f)))
        };
        let on = electromechanical_efficiency(&tune(b.f_m_hz), &b, b.f_m_hz).unwrap();
        let off = electromechanical_efficiency(&tune(b.f_m_hz + 50e6), &b, b.f_m_hz).unwrap();
        assert!(on > off);
        assert!(on / off >= 1.7, "tuning gain {}", on / off);
    }

    #[test]
    fn s11_phase_winds_once_for_overcoupled_resonator() {
        let mut b = reference_bvd(1e5);
        b.f_m_hz = 1.5e9;
        let m = test_matching();
        let f0 = matching_resonance_hz(&m, &b);
        let n = 4001;
        let mut total = 0.0;
        let mut prev = electrical_s11(&m, &b, f0 * 0.8).unwrap();
        for i in 1..n {
            let f = f0 * (0.8 + 0.4 * i as f64 / (n - 1) as f64);
            let g = electrical_s11(&m, &b, f).unwrap();
            assert!(g.norm() < 1.0);
            total += (g / prev).arg();
            prev = g;
        }
        assert!((total.abs() / (2.0 * PI) - 1.0).abs() < 0.1, "winding {total}");
    }

    #[test]
    fn keff_from_admittance_cases() {
        assert_eq!(keff_from_admittance(2.8e9, 2.8e9).unwrap(), 0.0);
        assert!((keff_from_admittance(3.0, 5.0).unwrap() - 0.64).abs() < 1e-15);
        let fs = 2.8e9;
        let fp = fs / (1.0f64 - 1.59e-6).sqrt();
        let k2 = keff_from_admittance(fs, fp).unwrap();
        assert!((k2 / 1.59e-6 - 1.0).abs() < 1e-9);
        assert!(keff_from_admittance(5.0, 3.0).is_err());
    }

    fn ki_model() -> KineticInductanceModel {
        KineticInductanceModel {
            l_geometric_h: 60e-9,
            l_kinetic0_h: 100e-9,
            t_c_k: 8.0,
        }
    }

    #[test]
    fn kinetic_inductance_limits() {
        let k = ki_model();
        let l0 = kinetic_inductance_at(&k, 0.0).unwrap();
        assert!((l0 - 160e-9).abs() < 1e-21);
        let l_small = kinetic_inductance_at(&k, 0.05).unwrap();
        assert!((l_small / l0 - 1.0).abs() < 1e-12);
        assert!(kinetic_inductance_at(&k, 0.9 * 8.0).unwrap() > kinetic_inductance_at(&k, 4.0).unwrap());
        assert!(kinetic_inductance_at(&k, 8.0).is_err());
        assert!(kinetic_inductance_at(&k, -1.0).is_err());
    }

    #[test]
    fn calibrated_model_reproduces_shift() {
        let c = 19.17e-15;
        let k = calibrate_kinetic_inductance(2.85e9, 2.79e9, 4.0, 8.0, c).unwrap();
        let pts = resonance_vs_temperature(&k, c, &[0.0, 4.0]).unwrap();
        assert!((pts[0].1 / 2.85e9 - 1.0).abs() < 1e-12);
        assert!((pts[1].1 / 2.79e9 - 1.0).abs() < 1e-12);
        assert!(calibrate_kinetic_inductance(2.85e9, 2.79e9, 4.0, 10.0, c).is_err());
    }

    #[test]
    fn resonance_decreases_with_temperature() {
        let grid: Vec<f64> = (0..790).map(|i| 0.01 * i as f64).collect();
        let pts = resonance_vs_temperature(&ki_model(), 19e-15, &grid).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        // Strict once the thermal factor is resolvable in double precision.
        for w in pts.windows(2).filter(|w| w[0].0 > 0.5) {
            assert!(w[1].1 < w[0].1, "{:?}", w);
        }
    }
}
