//! Physical constants (CODATA 2018) and the argon defaults.

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit [kg].
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mass of 40Ar [kg].
pub const ARGON40_MASS: f64 = 39.962_383_1 * ATOMIC_MASS_UNIT;
/// Wavelength of the spontaneously emitted photon, 2p4 -> 1s3 [m].
pub const EMISSION_WAVELENGTH: f64 = 795e-9;
/// Approximate natural linewidth of the 2p4 level [rad/s].
pub const ARGON_2P4_LINEWIDTH: f64 = 3.3e7;
