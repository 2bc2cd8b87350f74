//! JSON configuration: device model, pulsed protocol, operating point and
//! measured thermal table. Units are always part of the key name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::device::{Checker, DeviceModel};
use crate::error::{Error, Result};
use crate::optomech::Drive;
use crate::pulsed::{
    CountModel, JitterDistribution, JitterModel, MonteCarlo, OperatingPoint, PenaltyDefinition,
    PulseSchedule,
};

/// Environment variable naming the directory searched for relative config paths.
pub const CONFIG_DIR_ENV: &str = "TRANSDUCE_CONFIG_DIR";

/// The shipped description of the measured device.
pub const REFERENCE_DEVICE_JSON: &str = include_str!("../../configs/reference_device.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterConfig {
    pub distribution: JitterDistribution,
    /// Fixed jitter width; when absent the width is calibrated to `target_fwhm_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_fwhm_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub schedule: PulseSchedule,
    pub jitter: JitterConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarlo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountModel>,
    #[serde(default)]
    pub penalty_definition: PenaltyDefinition,
}

impl ProtocolConfig {
    /// Jitter model for `mode`, calibrating the width against this schedule
    /// when it is not fixed.
    pub fn jitter_model(&self, device: &DeviceModel, mode: &str) -> Result<JitterModel> {
        let m = device.mode(mode)?;
        let base = JitterModel {
            distribution: self.jitter.distribution,
            ..JitterModel::for_mode(m)?
        };
        match (self.jitter.distribution, self.jitter.sigma_hz, self.jitter.target_fwhm_hz) {
            (JitterDistribution::None, _, _) => Ok(base.without_jitter()),
            (_, Some(s), _) => Ok(base.with_sigma(s)),
            (_, None, Some(w)) => base.calibrate(&self.schedule, w),
            (_, None, None) => Err(Error::Uncalibrated(
                "protocol.jitter needs sigma_hz or target_fwhm_hz".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalRow {
    pub pulse_energy_j: f64,
    pub n_th: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub device: DeviceModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<OperatingPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thermal_table: Vec<ThermalRow>,
}

impl Config {
    pub fn reference() -> Self {
        parse_config(REFERENCE_DEVICE_JSON, "<reference_device>").expect("shipped config is valid")
    }

    pub fn thermal_pairs(&self) -> Vec<(f64, f64)> {
        self.thermal_table.iter().map(|r| (r.pulse_energy_j, r.n_th)).collect()
    }

    pub fn protocol(&self) -> Result<&ProtocolConfig> {
        self.protocol
            .as_ref()
            .ok_or_else(|| Error::domain("config has no `protocol` section"))
    }

    pub fn operating_point(&self) -> Result<&OperatingPoint> {
        self.operating_point
            .as_ref()
            .ok_or_else(|| Error::domain("config has no `operating_point` section"))
    }

    /// Validate every section, reporting all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut v = Checker::new("device");
        self.device.check(&mut v);
        v.prefix.clear();

        if let Some(p) = &self.protocol {
            let s = &p.schedule;
            v.positive("protocol.schedule.mw_freq_hz", s.mw_freq_hz);
            v.positive("protocol.schedule.mw_duration_s", s.mw_duration_s);
            v.nonneg("protocol.schedule.mw_drive_rate", s.mw_drive_rate);
            v.nonneg("protocol.schedule.readout_delay_s", s.readout_delay_s);
            v.positive("protocol.schedule.repetition_period_s", s.repetition_period_s);
            v.nonneg("protocol.schedule.background_phonons", s.background_phonons);
            v.positive("protocol.schedule.optical_pulse.f_l_hz", s.optical_pulse.f_l_hz);
            v.unit_open("protocol.schedule.optical_pulse.coupling_eta", s.optical_pulse.coupling_eta);
            match s.optical_pulse.drive {
                Drive::Pulsed { energy_j, length_s } => {
                    v.nonneg("protocol.schedule.optical_pulse.drive.energy_j", energy_j);
                    v.positive("protocol.schedule.optical_pulse.drive.length_s", length_s);
                }
                Drive::Continuous { .. } => v.push(
                    "protocol.schedule.optical_pulse.drive",
                    "readout must be a pulsed drive".into(),
                ),
            }
            if let Some(tau) = self.device.modes.iter().filter_map(|m| m.tau_s).reduce(f64::max) {
                if s.repetition_period_s < 5.0 * tau {
                    v.push(
                        "protocol.schedule.repetition_period_s",
                        format!("should exceed five mechanical lifetimes ({:.3e} s)", 5.0 * tau),
                    );
                }
            }
            if let Some(sig) = p.jitter.sigma_hz {
                v.nonneg("protocol.jitter.sigma_hz", sig);
            }
            if let Some(w) = p.jitter.target_fwhm_hz {
                v.positive("protocol.jitter.target_fwhm_hz", w);
            }
            if p.jitter.distribution != JitterDistribution::None
                && p.jitter.sigma_hz.is_none()
                && p.jitter.target_fwhm_hz.is_none()
            {
                v.push("protocol.jitter", "needs sigma_hz or target_fwhm_hz".into());
            }
            if p.monte_carlo.samples < 2 {
                v.push("protocol.monte_carlo.samples", "must be at least 2".into());
            }
            if let Some(c) = &p.counts {
                v.unit_open("protocol.counts.eta_chain", c.eta_chain);
                v.nonneg("protocol.counts.dark_rate", c.dark_rate);
                v.positive("protocol.counts.pulse_rate", c.pulse_rate);
            }
        }

        if let Some(op) = &self.operating_point {
            if !self.device.modes.iter().any(|m| m.name == op.mode) {
                v.push("operating_point.mode", format!("unknown mode `{}`", op.mode));
            }
            v.nonneg("operating_point.pulse_energy_j", op.pulse_energy_j);
            v.positive("operating_point.pulse_length_s", op.pulse_length_s);
            if let Some(t) = op.temperature_k {
                v.nonneg("operating_point.temperature_k", t);
            }
            if let Some(e) = op.measured_em_efficiency {
                v.unit_open("operating_point.measured_em_efficiency", e);
            }
            if let Some(p) = op.jitter_penalty {
                if !(p.is_finite() && p >= 1.0) {
                    v.push("operating_point.jitter_penalty", format!("must be >= 1, got {p}"));
                }
            }
        }

        for (i, r) in self.thermal_table.iter().enumerate() {
            v.nonneg(&format!("thermal_table[{i}].pulse_energy_j"), r.pulse_energy_j);
            v.nonneg(&format!("thermal_table[{i}].n_th"), r.n_th);
            if i > 0 && r.pulse_energy_j <= self.thermal_table[i - 1].pulse_energy_j {
                v.push(
                    &format!("thermal_table[{i}].pulse_energy_j"),
                    "energies must be strictly increasing".into(),
                );
            }
        }
        v.finish()
    }
}

fn parse_error(path: &str, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str, path: &str) -> Result<Config> {
    let cfg: Config = serde_json::from_str(text).map_err(|e| parse_error(path, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Relative paths that do not exist are looked up under `$TRANSDUCE_CONFIG_DIR`.
pub fn resolve_config_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_config(path: &Path) -> Result<Config> {
    let path = resolve_config_path(path);
    parse_config(&read(&path)?, &path.display().to_string())
}

/// Load only the device model from a config file.
pub fn load_device(path: &Path) -> Result<DeviceModel> {
    Ok(load_config(path)?.device)
}

/// Load a config and apply `key.path=value` overrides before validation.
///
/// Paths use dots for objects and `[i]` for arrays, e.g.
/// `device.modes[0].g0_hz=7.1e5`. Values are parsed as JSON, falling back to
/// a plain string.
pub fn load_config_with_overrides(text: &str, path: &str, overrides: &[(String, String)]) -> Result<Config> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| parse_error(path, &e))?;
    for (key, raw) in overrides {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        let slot = lookup_mut(&mut doc, key)
            .ok_or_else(|| Error::domain(format!("override path `{key}` does not exist in {path}")))?;
        *slot = value;
    }
    let cfg: Config = serde_json::from_value(doc).map_err(|e| Error::Parse {
        path: path.to_string(),
        line: 0,
        column: 0,
        message: format!("after overrides: {e}"),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn lookup_mut<'a>(mut v: &'a mut Value, key: &str) -> Option<&'a mut Value> {
    for part in key.split('.') {
        let (name, indices) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !name.is_empty() {
            v = v.as_object_mut()?.get_mut(name)?;
        }
        for idx in indices.split('[').filter(|s| !s.is_empty()) {
            let i: usize = idx.strip_suffix(']')?.parse().ok()?;
            v = v.as_array_mut()?.get_mut(i)?;
        }
    }
    Some(v)
}

/// Split `key=value` pairs from the command line.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("override `{s}` must look like key.path=value"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_loads() {
        let c = Config::reference();
        assert_eq!(c.device.optical.kappa_hz, 4.17e9);
        assert_eq!(c.device.mode("2.799GHz").unwrap().g0_hz, 700e3);
        assert_eq!(c.device.electrical.c_res_f, 0.17e-15);
        assert_eq!(c.device.electrical.matching.z_source_ohm, 50.0);
    }

    #[test]
    fn empty_document_is_a_parse_error() {
        assert!(matches!(parse_config("", "x.json"), Err(Error::Parse { line: 1, .. })));
        match parse_config("{\n  \"device\": [1,\n", "x.json") {
            Err(Error::Parse { line, .. }) => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_reported_with_paths() {
        let bad = load_config_with_overrides(
            REFERENCE_DEVICE_JSON,
            "reference",
            &[
                ("device.optical.kappa_e_hz".into(), "5e9".into()),
                ("device.modes[1].name".into(), "\"2.799GHz\"".into()),
                ("device.losses.eta_coup".into(), "1.5".into()),
            ],
        );
        let Err(Error::Validation(v)) = bad else { panic!("{bad:?}") };
        let paths: Vec<&str> = v.iter().map(|x| x.path.as_str()).collect();
        assert!(paths.contains(&"device.optical.kappa_e_hz"), "{paths:?}");
        assert!(paths.contains(&"device.modes[1].name"));
        assert!(paths.contains(&"device.losses.eta_coup"));
    }

    #[test]
    fn overrides_apply_and_unknown_paths_fail() {
        let c = load_config_with_overrides(
            REFERENCE_DEVICE_JSON,
            "reference",
            &[("device.modes[0].g0_hz".into(), "7.1e5".into())],
        )
        .unwrap();
        assert_eq!(c.device.modes[0].g0_hz, 7.1e5);
        assert!(load_config_with_overrides(REFERENCE_DEVICE_JSON, "p", &[("device.nope".into(), "1".into())]).is_err());
        assert_eq!(parse_override("a.b = 3").unwrap(), ("a.b".into(), "3".into()));
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let c = Config::reference();
        let text = serde_json::to_string(&c).unwrap();
        let back: Config = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = REFERENCE_DEVICE_JSON.replacen("\"thermal_table\"", "\"thermal_tabel\"", 1);
        assert!(matches!(parse_config(&text, "x"), Err(Error::Parse { .. })));
    }
}
