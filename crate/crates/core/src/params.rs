use alloc::format;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::constants::{
    ARGON40_MASS, ARGON_2P4_LINEWIDTH, EMISSION_WAVELENGTH, HBAR, SPEED_OF_LIGHT,
};
use crate::{Error, Result};

/// Physical constants and geometry of one experiment.
///
/// The mirror sits at `z = 0` and the atoms move along `x` with constant
/// velocity `v_parallel`; all drift times are distances divided by it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    /// Wavelength of the emitted photon [m].
    pub wavelength: f64,
    /// Atom mass [kg].
    pub mass: f64,
    /// Longitudinal beam velocity [m/s].
    pub v_parallel: f64,
    /// Distance from the emission region to the Bragg grating [m].
    pub l_grating: f64,
    /// Distance from the emission region to the detector [m].
    pub l_detector: f64,
    /// Full transverse width of the atomic beam [m].
    pub beam_width: f64,
    /// Mean atom-mirror distance [m].
    pub mean_distance: f64,
    /// Fresnel coefficient of the transverse electric mode.
    pub r_s: Complex64,
    /// Fresnel coefficient of the transverse magnetic mode.
    pub r_p: Complex64,
    /// Natural linewidth of the emitting level [rad/s].
    pub linewidth: f64,
    /// Speed of light [m/s].
    pub speed_of_light: f64,
}

impl Default for ExperimentParams {
    /// Metastable argon in front of an ideal mirror (`r_s = -1`, `r_p = +1`).
    fn default() -> Self {
        Self {
            wavelength: EMISSION_WAVELENGTH,
            mass: ARGON40_MASS,
            v_parallel: 600.0,
            l_grating: 0.05,
            l_detector: 1.0,
            beam_width: 10e-6,
            mean_distance: 2.8e-6,
            r_s: Complex64::new(-1.0, 0.0),
            r_p: Complex64::new(1.0, 0.0),
            linewidth: ARGON_2P4_LINEWIDTH,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }
}

impl ExperimentParams {
    /// Photon wavenumber `k0 = 2π/λ` [rad/m].
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Recoil velocity `ħk0/m` [m/s].
    pub fn recoil_velocity(&self) -> f64 {
        HBAR * self.k0() / self.mass
    }

    /// Recoil frequency `ħk0²/(2m)` [rad/s]; a momentum `κ ħk0` accumulates
    /// the free phase `κ² ω_r t`.
    pub fn recoil_frequency(&self) -> f64 {
        let k0 = self.k0();
        HBAR * k0 * k0 / (2.0 * self.mass)
    }

    /// Drift time from emission to the grating [s].
    pub fn time_to_grating(&self) -> f64 {
        self.l_grating / self.v_parallel
    }

    /// Drift time from the grating to the detector [s].
    pub fn time_grating_to_detector(&self) -> f64 {
        (self.l_detector - self.l_grating) / self.v_parallel
    }

    pub fn with_mean_distance(&self, d: f64) -> Self {
        Self { mean_distance: d, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        positive("wavelength", self.wavelength)?;
        positive("mass", self.mass)?;
        positive("v_parallel", self.v_parallel)?;
        positive("linewidth", self.linewidth)?;
        positive("speed_of_light", self.speed_of_light)?;
        non_negative("l_grating", self.l_grating)?;
        non_negative("beam_width", self.beam_width)?;
        if !self.mean_distance.is_finite() || self.mean_distance < 0.0 {
            return Err(Error::InvalidParameter {
                name: "mean_distance",
                reason: format!("must be >= 0, got {}", self.mean_distance),
            });
        }
        if !(self.l_detector >= self.l_grating) {
            return Err(Error::InvalidParameter {
                name: "l_detector",
                reason: format!(
                    "detector ({} m) must not be before the grating ({} m)",
                    self.l_detector, self.l_grating
                ),
            });
        }
        for (name, r) in [("r_s", self.r_s), ("r_p", self.r_p)] {
            if !(r.norm() <= 1.0 + 1e-12) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("|{name}| = {} exceeds 1", r.norm()),
                });
            }
        }
        let extent = self.mean_distance + self.beam_width;
        let limit = 1e-3 * self.speed_of_light / self.linewidth;
        if extent >= limit {
            return Err(Error::Retardation { extent, limit });
        }
        Ok(())
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be > 0, got {value}") })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {value}") })
    }
}
