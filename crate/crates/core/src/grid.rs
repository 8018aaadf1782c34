//! Uniform momentum grid and its conjugate position grid.
//!
//! Grid point `j` carries momentum `p_j = (j - n/2) Δp` with
//! `Δp = 2 p_max / n` (units of `ħk0`), so `p = 0` is a grid point and the
//! grid runs from `-p_max` to `p_max - Δp`. The conjugate position grid is
//! `z_k = (k - n/2) Δz` with `Δz = π / (p_max k0)` metres, and the two
//! representations are linked by
//!
//! ```text
//! ψ(z_k) = s Σ_j c(p_j) e^{i p_j k0 z_k},      s = sqrt(Δp / (n Δz))
//! ```
//!
//! which maps `Σ |c|² Δp = 1` onto `Σ |ψ|² Δz = 1`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fft::FftPlan;
use crate::{Error, Result};

/// Smallest admissible number of grid points.
pub const MIN_POINTS: usize = 64;
/// Smallest admissible momentum half-range [ħk0].
pub const MIN_P_MAX: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct MomentumGrid {
    n: usize,
    p_max: f64,
    k0: f64,
    plan: Arc<FftPlan>,
}

impl PartialEq for MomentumGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.p_max == other.p_max && self.k0 == other.k0
    }
}

/// Builds a grid of `n_points` momenta spanning `[-p_max, p_max)`; `k0`
/// converts the conjugate positions to metres.
pub fn make_grid(n_points: usize, p_max: f64, k0: f64) -> Result<MomentumGrid> {
    MomentumGrid::new(n_points, p_max, k0)
}

impl MomentumGrid {
    pub fn new(n_points: usize, p_max: f64, k0: f64) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::GridTooSmall { n_points, min: MIN_POINTS });
        }
        if n_points % 2 != 0 {
            return Err(Error::OddGrid { n_points });
        }
        if !(p_max >= MIN_P_MAX) || !p_max.is_finite() {
            return Err(Error::MomentumRangeTooSmall { p_max, min: MIN_P_MAX });
        }
        crate::params::positive("k0", k0)?;
        Ok(Self { n: n_points, p_max, k0, plan: Arc::new(FftPlan::new(n_points)) })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Momentum spacing `Δp` [ħk0].
    pub fn spacing(&self) -> f64 {
        2.0 * self.p_max / self.n as f64
    }

    pub fn momentum(&self, j: usize) -> f64 {
        self.offset(j) as f64 * self.spacing()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.momentum(j)).collect()
    }

    /// Signed index offset of point `j` from `p = 0`.
    pub fn offset(&self, j: usize) -> i64 {
        j as i64 - (self.n / 2) as i64
    }

    /// Number of grid steps in `q`, if `q` is a multiple of `Δp` within
    /// `1e-9` of a step.
    pub fn steps(&self, q: f64) -> Option<i64> {
        let s = q / self.spacing();
        let r = s.round();
        ((s - r).abs() < 1e-9).then_some(r as i64)
    }

    /// Position spacing `Δz` [m].
    pub fn position_spacing(&self) -> f64 {
        core::f64::consts::PI / (self.p_max * self.k0)
    }

    /// Position of sample `k` [m].
    pub fn position(&self, k: usize) -> f64 {
        self.offset(k) as f64 * self.position_spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.position(k)).collect()
    }

    /// Dimensionless phase coordinate `ξ_k = k0 z_k`.
    pub fn xi(&self, k: usize) -> f64 {
        self.offset(k) as f64 * core::f64::consts::PI / self.p_max
    }

    fn scale(&self) -> f64 {
        (self.spacing() / (self.n as f64 * self.position_spacing())).sqrt()
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.n, "amplitude vector does not match the grid");
    }

    /// Momentum amplitudes to position samples.
    pub fn to_position(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        self.check_len(amplitudes.len());
        let mut data: Vec<Complex64> =
            amplitudes.iter().enumerate().map(|(j, &c)| alternate(j) * c).collect();
        self.plan.inverse(&mut data);
        let s = self.scale() * alternate(self.n / 2);
        for (k, x) in data.iter_mut().enumerate() {
            *x *= s * alternate(k);
        }
        data
    }

    /// Position samples back to momentum amplitudes.
    pub fn to_momentum(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut data = samples.to_vec();
        self.to_momentum_in_place(&mut data);
        data
    }

    pub(crate) fn to_momentum_in_place(&self, data: &mut [Complex64]) {
        self.check_len(data.len());
        for (k, x) in data.iter_mut().enumerate() {
            *x *= alternate(k);
        }
        self.plan.forward(data);
        let s = alternate(self.n / 2) / (self.n as f64 * self.scale());
        for (j, x) in data.iter_mut().enumerate() {
            *x *= s * alternate(j);
        }
    }

    /// `Σ |c|² Δp`.
    pub fn norm_sqr(&self, amplitudes: &[Complex64]) -> f64 {
        amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.spacing()
    }
}

#[inline]
fn alternate(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
