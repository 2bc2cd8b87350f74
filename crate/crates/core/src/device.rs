//! The composed transducer: optics, mechanical modes, electrical interface
//! and loss figures.

use serde::{Deserialize, Serialize};

use crate::em_circuit::{BvdParams, KineticInductanceModel, MatchingParams};
use crate::error::{Error, Result, Violation};
use crate::optomech::{MechanicalMode, OpticalCavity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricalModel {
    /// Static capacitance of the piezo resonator.
    pub c_res_f: f64,
    pub k_eff_sq: f64,
    pub matching: MatchingParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinetic: Option<KineticInductanceModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Losses {
    /// Fiber-to-waveguide power coupling.
    pub eta_coup: f64,
    /// Filter, path and detector efficiency after the device.
    pub eta_chain: f64,
    /// Cable attenuation between the microwave source and the chip.
    pub mw_line_attenuation_db: f64,
}

impl Losses {
    /// Linear power transmission of the microwave line.
    pub fn mw_line_transmission(&self) -> f64 {
        10f64.powf(-self.mw_line_attenuation_db / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub optical: OpticalCavity,
    pub modes: Vec<MechanicalMode>,
    pub electrical: ElectricalModel,
    pub losses: Losses,
}

impl DeviceModel {
    pub fn mode(&self, name: &str) -> Result<&MechanicalMode> {
        self.modes.iter().find(|m| m.name == name).ok_or_else(|| {
            let known: Vec<_> = self.modes.iter().map(|m| m.name.as_str()).collect();
            Error::domain(format!("no mechanical mode named `{name}` (known: {known:?})"))
        })
    }

    /// BVD view of one mechanical mode through the shared piezo capacitor.
    pub fn bvd(&self, mode: &MechanicalMode) -> BvdParams {
        BvdParams {
            c_res_f: self.electrical.c_res_f,
            k_eff_sq: self.electrical.k_eff_sq,
            f_m_hz: mode.f_m_hz,
            linewidth_hz: mode.linewidth_hz,
        }
    }

    /// Matching network at temperature `t_k`, with the coil inductance taken
    /// from the kinetic-inductance model when one is configured.
    pub fn matching_at(&self, t_k: Option<f64>) -> Result<MatchingParams> {
        match (t_k, &self.electrical.kinetic) {
            (Some(t), Some(k)) => Ok(self
                .electrical
                .matching
                .with_inductance(crate::em_circuit::kinetic_inductance_at(k, t)?)),
            _ => Ok(self.electrical.matching),
        }
    }

    /// Check every invariant and report all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Checker::new("device");
        self.check(&mut v);
        v.finish()
    }

    pub(crate) fn check(&self, v: &mut Checker) {
        let o = &self.optical;
        v.positive("optical.f_c_hz", o.f_c_hz);
        v.positive("optical.kappa_hz", o.kappa_hz);
        v.positive("optical.kappa_e_hz", o.kappa_e_hz);
        if o.kappa_e_hz > o.kappa_hz {
            v.push(
                "optical.kappa_e_hz",
                format!("external rate {} exceeds total linewidth {}", o.kappa_e_hz, o.kappa_hz),
            );
        }

        if self.modes.is_empty() {
            v.push("modes", "at least one mechanical mode is required".into());
        }
        for (i, m) in self.modes.iter().enumerate() {
            let p = |f: &str| format!("modes[{i}].{f}");
            if m.name.trim().is_empty() {
                v.push(&p("name"), "mode name must not be empty".into());
            }
            if self.modes[..i].iter().any(|other| other.name == m.name) {
                v.push(&p("name"), format!("duplicate mode name `{}`", m.name));
            }
            v.positive(&p("f_m_hz"), m.f_m_hz);
            v.positive(&p("linewidth_hz"), m.linewidth_hz);
            v.positive(&p("g0_hz"), m.g0_hz);
            if let Some(t) = m.tau_s {
                v.positive(&p("tau_s"), t);
            }
        }

        let e = &self.electrical;
        v.positive("electrical.c_res_f", e.c_res_f);
        if !(e.k_eff_sq > 0.0 && e.k_eff_sq < 1.0) {
            v.push("electrical.k_eff_sq", format!("must lie in (0, 1), got {}", e.k_eff_sq));
        }
        v.positive("electrical.matching.l_match_h", e.matching.l_match_h);
        v.nonneg("electrical.matching.c_match_f", e.matching.c_match_f);
        v.nonneg("electrical.matching.r_loss_ohm", e.matching.r_loss_ohm);
        v.positive("electrical.matching.z_source_ohm", e.matching.z_source_ohm);
        if let Some(k) = &e.kinetic {
            v.positive("electrical.kinetic.l_geometric_h", k.l_geometric_h);
            v.nonneg("electrical.kinetic.l_kinetic0_h", k.l_kinetic0_h);
            v.positive("electrical.kinetic.t_c_k", k.t_c_k);
        }

        let l = &self.losses;
        v.unit_open("losses.eta_coup", l.eta_coup);
        v.unit_open("losses.eta_chain", l.eta_chain);
        v.nonneg("losses.mw_line_attenuation_db", l.mw_line_attenuation_db);
    }
}

/// Accumulates violations under a path prefix.
pub(crate) struct Checker {
    pub(crate) prefix: String,
    pub(crate) violations: Vec<Violation>,
}

impl Checker {
    pub(crate) fn new(prefix: &str) -> Self {
        Self {
            prefix: prefix.to_string(),
            violations: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, field: &str, message: String) {
        let path = if self.prefix.is_empty() {
            field.to_string()
        } else {
            format!("{}.{field}", self.prefix)
        };
        self.violations.push(Violation { path, message });
    }

    pub(crate) fn positive(&mut self, field: &str, x: f64) {
        if !(x.is_finite() && x > 0.0) {
            self.push(field, format!("must be finite and > 0, got {x}"));
        }
    }

    pub(crate) fn nonneg(&mut self, field: &str, x: f64) {
        if !(x.is_finite() && x >= 0.0) {
            self.push(field, format!("must be finite and >= 0, got {x}"));
        }
    }

    /// `0 < x <= 1`.
    pub(crate) fn unit_open(&mut self, field: &str, x: f64) {
        if !(x > 0.0 && x <= 1.0) {
            self.push(field, format!("must lie in (0, 1], got {x}"));
        }
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations))
        }
    }
}
