//! Physical constants (CODATA 2018).

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054571817e-34;
/// Bohr magneton (J/T).
pub const MU_B: f64 = 9.2740100783e-24;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.8541878128e-12;
/// Atomic mass unit (kg).
pub const AMU: f64 = 1.66053906660e-27;
