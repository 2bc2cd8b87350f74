//! Physical constants (CODATA 2018, exact where defined).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// C/cm^2 to C/m^2.
pub const C_PER_CM2_TO_SI: f64 = 1e4;
