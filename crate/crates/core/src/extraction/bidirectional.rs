use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-magnitude scattering amplitudes for the two-way estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SParamQuad {
    pub s_oe_pk: f64,
    pub s_eo_pk: f64,
    pub s_oo_bgd: f64,
    pub s_ee_bgd: f64,
}

/// `S_OE,pk S_EO,pk / (S_OO,bgd S_EE,bgd)`. Line losses in each direction
/// cancel against the matching reflection backgrounds.
pub fn bidirectional_efficiency(q: &SParamQuad) -> Result<f64> {
    for (name, v) in [
        ("s_oe_pk", q.s_oe_pk),
        ("s_eo_pk", q.s_eo_pk),
        ("s_oo_bgd", q.s_oo_bgd),
        ("s_ee_bgd", q.s_ee_bgd),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(format!("{name} must be finite and > 0, got {v}")));
        }
    }
    Ok((q.s_oe_pk * q.s_eo_pk) / (q.s_oo_bgd * q.s_ee_bgd))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities() {
        let eq = SParamQuad { s_oe_pk: 0.3, s_eo_pk: 0.3, s_oo_bgd: 0.3, s_ee_bgd: 0.3 };
        assert_eq!(bidirectional_efficiency(&eq).unwrap(), 1.0);
        let (oo, ee, g) = (0.8f64, 0.02f64, 1.8e-3);
        let s = g * (oo * ee).sqrt();
        let q = SParamQuad { s_oe_pk: s, s_eo_pk: s, s_oo_bgd: oo, s_ee_bgd: ee };
        assert!((bidirectional_efficiency(&q).unwrap() / (g * g) - 1.0).abs() < 1e-14);
        let zero = SParamQuad { s_ee_bgd: 0.0, ..q };
        assert!(bidirectional_efficiency(&zero).is_err());
    }
}
