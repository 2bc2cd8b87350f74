//! Rotated piezoelectric tensor of a zincblende crystal (GaP) cut on (001).
//!
//! Voigt columns are ordered `xx, yy, zz, yz, xz, xy`. All values are stored
//! in C/m^2.

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::consts::C_PER_CM2_TO_SI;
use crate::error::{require_finite, Result};

/// Bulk `e14` of GaP, C/cm^2.
pub const GAP_E14_C_PER_CM2: f64 = -0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PiezoUnit {
    #[serde(rename = "C/m^2")]
    CoulombPerM2,
    #[serde(rename = "C/cm^2")]
    CoulombPerCm2,
}

/// A piezoelectric constant with an explicit unit tag, converted on entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiezoConstant {
    pub value: f64,
    pub unit: PiezoUnit,
}

impl PiezoConstant {
    pub fn to_si(self) -> f64 {
        match self.unit {
            PiezoUnit::CoulombPerM2 => self.value,
            PiezoUnit::CoulombPerCm2 => self.value * C_PER_CM2_TO_SI,
        }
    }
}

pub type Voigt3x6 = SMatrix<f64, 3, 6>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiezoTensor {
    pub entries: Voigt3x6,
    pub phi: f64,
    pub e14: f64,
}

impl PiezoTensor {
    /// Entry `e'_jk` with 1-based indices as written in the literature.
    pub fn e(&self, j: usize, k: usize) -> f64 {
        self.entries[(j - 1, k - 1)]
    }

    /// Row-major copy, convenient for serialization and FFI.
    pub fn to_rows(&self) -> [[f64; 6]; 3] {
        let mut out = [[0.0; 6]; 3];
        for (j, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.entries[(j, k)];
            }
        }
        out
    }

    /// Frobenius norm of the underlying third-rank tensor.
    ///
    /// Shear columns stand for two symmetric tensor entries each and carry
    /// the engineering factor of two, so they are weighted by `1/2` in the sum
    /// of squares. This is the quantity preserved under rotation.
    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..3 {
            for k in 0..6 {
                let w = if k < 3 { 1.0 } else { 0.5 };
                s += w * self.entries[(j, k)].powi(2);
            }
        }
        s.sqrt()
    }
}

/// Tensor for an in-plane rotation `phi` about [001]:
///
/// ```text
/// e14/2 * [[ 0,  0, 0, 2a, -2b,  0],
///          [ 0,  0, 0, 2b,  2a,  0],
///          [-b,  b, 0,  0,   0, 2a]]      a = sin 2phi, b = cos 2phi
/// ```
pub fn rotated_piezo_tensor(phi: f64, e14: f64) -> Result<PiezoTensor> {
    require_finite("phi", phi)?;
    require_finite("e14", e14)?;
    let (a, b) = (2.0 * phi).sin_cos();
    let h = e14 / 2.0;
    #[rustfmt::skip]
    let entries = Voigt3x6::new(
        0.0,    0.0,   0.0, 2.0 * h * a, -2.0 * h * b, 0.0,
        0.0,    0.0,   0.0, 2.0 * h * b,  2.0 * h * a, 0.0,
        -h * b, h * b, 0.0, 0.0,          0.0,         2.0 * h * a,
    );
    Ok(PiezoTensor { entries, phi, e14 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutOfPlane {
    pub e31: f64,
    pub e32: f64,
}

/// Coupling of an out-of-plane field to in-plane normal strain.
pub fn out_of_plane_coupling(phi: f64, e14: f64) -> Result<OutOfPlane> {
    let t = rotated_piezo_tensor(phi, e14)?;
    Ok(OutOfPlane {
        e31: t.e(3, 1),
        e32: t.e(3, 2),
    })
}
