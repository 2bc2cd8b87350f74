//! Machine-readable run reports.
//!
//! Everything except `timestamp` is a pure function of the command, its
//! inputs and the seed, so two runs can be compared byte for byte once the
//! timestamp is stripped.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::spectrum::write_atomic;
use crate::consts::{HBAR, K_B};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: Value,
    /// Where each input came from: config file, overrides, built-in constants.
    pub provenance: Value,
    pub results: Value,
    pub timestamp: String,
}

impl Report {
    pub fn new(command: &str, seed: Option<u64>, inputs: Value, provenance: Value, results: Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs,
            provenance,
            results,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports are always serializable");
        s.push('\n');
        s
    }

    /// The report with its timestamp blanked, for determinism checks.
    pub fn canonical(&self) -> String {
        Self { timestamp: String::new(), ..self.clone() }.to_json()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json())
    }
}

/// Physical constants used by every model, with their source.
pub fn constants_provenance() -> Value {
    json!({
        "hbar_j_s": { "value": HBAR, "source": "CODATA 2018 (exact h / 2pi)" },
        "k_b_j_per_k": { "value": K_B, "source": "SI 2019 exact" },
    })
}

/// Provenance record for configuration-derived inputs.
pub fn provenance(config_path: &str, overrides: &[(String, String)]) -> Value {
    let ov: serde_json::Map<String, Value> = overrides
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    json!({
        "config": config_path,
        "overrides": ov,
        "constants": constants_provenance(),
    })
}

/// Serialize a result for a report; non-finite floats become `null`.
pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::domain(format!("cannot serialize result: {e}")))
}
