//! Pure motional states on a [`MomentumGrid`] and the elementary unitaries.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::constants::HBAR;
use crate::grid::MomentumGrid;
use crate::params::{non_negative, positive};
use crate::{Error, Result};

/// Largest probability allowed to be pushed off the grid by a kick.
pub const KICK_LOSS_TOLERANCE: f64 = 1e-9;

/// Shape of `|f(p)|` in the initial packet.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Gaussian momentum density with rms width `sigma_p` [ħk0].
    Gaussian { sigma_p: f64 },
    /// Measured momentum density, interpolated linearly onto the grid.
    Measured(MomentumTable),
}

/// Tabulated momentum density: strictly increasing momenta [ħk0] and
/// non-negative (not necessarily normalised) densities.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumTable {
    momenta: Vec<f64>,
    density: Vec<f64>,
}

impl MomentumTable {
    pub fn new(momenta: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if momenta.len() != density.len() || momenta.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "profile",
                reason: format!(
                    "need >= 2 (momentum, density) pairs of equal length, got {} and {}",
                    momenta.len(),
                    density.len()
                ),
            });
        }
        if momenta.windows(2).any(|w| !(w[1] > w[0])) || momenta.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "profile",
                reason: "momenta must be finite and strictly increasing".into(),
            });
        }
        if density.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "profile",
                reason: "densities must be finite and non-negative".into(),
            });
        }
        if density.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidParameter {
                name: "profile",
                reason: "density is identically zero".into(),
            });
        }
        Ok(Self { momenta, density })
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Linear interpolation; zero outside the table.
    pub fn interpolate(&self, p: f64) -> f64 {
        let m = &self.momenta;
        if p < m[0] || p > m[m.len() - 1] {
            return 0.0;
        }
        let i = m.partition_point(|&x| x <= p).clamp(1, m.len() - 1);
        let (p0, p1) = (m[i - 1], m[i]);
        let (d0, d1) = (self.density[i - 1], self.density[i]);
        d0 + (d1 - d0) * (p - p0) / (p1 - p0)
    }

    /// A table covers a range if it spans it, or if it has decayed to below
    /// `1e-6` of its peak at every end that falls inside the range.
    fn covers(&self, lo: f64, hi: f64) -> bool {
        let peak = self.density.iter().cloned().fold(0.0, f64::max);
        let small = |x: f64| x <= 1e-6 * peak;
        let first = self.momenta[0];
        let last = self.momenta[self.momenta.len() - 1];
        (first <= lo || small(self.density[0])) && (last >= hi || small(self.density[self.density.len() - 1]))
    }
}

/// Free phase `φf(p)` of the initial packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseModel {
    Flat,
    /// `φf(p) = beta p²` with `p` in units of ħk0.
    Quadratic { beta: f64 },
}

impl PhaseModel {
    pub fn phase(&self, p: f64) -> f64 {
        match *self {
            PhaseModel::Flat => 0.0,
            PhaseModel::Quadratic { beta } => beta * p * p,
        }
    }
}

/// Recipe for the initial packet.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketSpec {
    pub profile: Profile,
    /// Centre distance from the mirror `d` [m].
    pub distance: f64,
    pub phase: PhaseModel,
    /// Shift of the whole momentum profile [ħk0].
    pub center_momentum: f64,
}

impl Default for WavepacketSpec {
    fn default() -> Self {
        Self {
            profile: Profile::Gaussian { sigma_p: 0.2 },
            distance: 2.8e-6,
            phase: PhaseModel::Flat,
            center_momentum: 0.0,
        }
    }
}

impl WavepacketSpec {
    pub fn gaussian(sigma_p: f64, distance: f64) -> Self {
        Self { profile: Profile::Gaussian { sigma_p }, distance, ..Self::default() }
    }

    pub fn with_distance(&self, distance: f64) -> Self {
        Self { distance, ..self.clone() }
    }
}

/// A pure state of the mirror-normal motion: momentum amplitudes `c(p)`
/// normalised as `Σ |c|² Δp = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    grid: MomentumGrid,
    amplitudes: Vec<Complex64>,
}

impl Wavepacket {
    /// Wraps raw amplitudes without normalising them.
    pub fn from_amplitudes(grid: MomentumGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, amplitudes })
    }

    /// Packet from position samples (normalised as `Σ |ψ|² Δz = 1`).
    pub fn from_position(grid: MomentumGrid, samples: &[Complex64]) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        let amplitudes = grid.to_momentum(samples);
        Ok(Self { grid, amplitudes })
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.norm_sqr(&self.amplitudes)
    }

    /// Rescales to unit norm. Fails on a (numerically) zero state.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Normalization { what: "wavepacket", value: n });
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|c| *c *= s);
        Ok(self)
    }

    /// `|c(p)|²` on the grid.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `⟨p⟩` [ħk0].
    pub fn mean_momentum(&self) -> f64 {
        density_moments(&self.grid, &self.density()).0
    }

    pub fn to_position(&self) -> Vec<Complex64> {
        self.grid.to_position(&self.amplitudes)
    }

    /// `|ψ(z)|²` on the position grid [1/m].
    pub fn position_density(&self) -> Vec<f64> {
        self.to_position().iter().map(|x| x.norm_sqr()).collect()
    }

    /// `(⟨z⟩, rms width)` [m].
    pub fn position_moments(&self) -> (f64, f64) {
        position_moments(&self.grid, &self.position_density())
    }

    pub fn mean_position(&self) -> f64 {
        self.position_moments().0
    }

    /// Probability of finding the atom at `z < 0`, i.e. inside the mirror.
    pub fn probability_behind_mirror(&self) -> f64 {
        probability_behind_mirror(&self.grid, &self.position_density())
    }
}

pub(crate) fn position_moments(grid: &MomentumGrid, density: &[f64]) -> (f64, f64) {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (k, &rho) in density.iter().enumerate() {
        let z = grid.position(k);
        m0 += rho;
        m1 += rho * z;
        m2 += rho * z * z;
    }
    let mean = m1 / m0;
    (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
}

pub(crate) fn probability_behind_mirror(grid: &MomentumGrid, density: &[f64]) -> f64 {
    let dz = grid.position_spacing();
    density.iter().enumerate().filter(|(k, _)| grid.position(*k) < 0.0).map(|(_, &r)| r).sum::<f64>() * dz
}

/// Mean and rms width of a density sampled on the grid momenta.
pub fn density_moments(grid: &MomentumGrid, density: &[f64]) -> (f64, f64) {
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (j, &rho) in density.iter().enumerate() {
        let p = grid.momentum(j);
        m0 += rho;
        m1 += rho * p;
        m2 += rho * p * p;
    }
    let mean = m1 / m0;
    (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
}

/// Builds `c(p) = |f(p - p_c)| e^{-i p k0 d} e^{i φf(p)}`, normalised.
///
/// The sign of the displacement phase is chosen so that, with
/// `⟨z|p⟩ = e^{i p k0 z}`, a flat-phase packet is centred at `z = +d` in
/// front of the mirror.
pub fn build_wavepacket(spec: &WavepacketSpec, grid: &MomentumGrid) -> Result<Wavepacket> {
    non_negative("distance", spec.distance)?;
    if !spec.center_momentum.is_finite() {
        return Err(Error::InvalidParameter {
            name: "center_momentum",
            reason: format!("must be finite, got {}", spec.center_momentum),
        });
    }
    if let PhaseModel::Quadratic { beta } = spec.phase {
        if !beta.is_finite() {
            return Err(Error::InvalidParameter { name: "beta", reason: format!("must be finite, got {beta}") });
        }
    }
    let pc = spec.center_momentum;
    let magnitude: Vec<f64> = match &spec.profile {
        Profile::Gaussian { sigma_p } => {
            let sigma = *sigma_p;
            positive("sigma_p", sigma)?;
            let (min, max) = (4.0 * grid.spacing(), grid.p_max() / 4.0);
            if sigma < min || sigma > max {
                return Err(Error::UnresolvableWidth { sigma_p: sigma, min, max });
            }
            (0..grid.n_points())
                .map(|j| {
                    let x = grid.momentum(j) - pc;
                    (-x * x / (4.0 * sigma * sigma)).exp()
                })
                .collect()
        }
        Profile::Measured(table) => {
            let (lo, hi) = (-grid.p_max() - pc, grid.p_max() - pc);
            if !table.covers(lo, hi) {
                return Err(Error::ProfileCoverage {
                    table_min: table.momenta[0] + pc,
                    table_max: table.momenta[table.momenta.len() - 1] + pc,
                    grid_min: -grid.p_max(),
                    grid_max: grid.p_max(),
                });
            }
            (0..grid.n_points()).map(|j| table.interpolate(grid.momentum(j) - pc).sqrt()).collect()
        }
    };
    let kd = spec.distance * grid.k0();
    let amplitudes = magnitude
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let p = grid.momentum(j);
            Complex64::from_polar(f, -p * kd + spec.phase.phase(p))
        })
        .collect();
    Wavepacket { grid: grid.clone(), amplitudes }.normalized()
}

/// Outcome of [`apply_momentum_kick`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kick {
    /// Kick actually applied (a multiple of `Δp`) [ħk0].
    pub applied: f64,
    /// Requested minus applied kick [ħk0].
    pub residual: f64,
    /// Probability moved off the grid and discarded.
    pub lost_norm: f64,
}

/// Shifts the momentum distribution by `q`: `c'(p) = c(p - q)`.
///
/// `q` is rounded to the nearest multiple of `Δp` and the residual is
/// reported. Content shifted past the grid edge is discarded, never wrapped.
pub fn apply_momentum_kick(psi: &Wavepacket, q: f64) -> Result<(Wavepacket, Kick)> {
    let grid = &psi.grid;
    let limit = grid.p_max() / 2.0;
    if !(q.abs() <= limit) {
        return Err(Error::KickTooLarge { q, limit });
    }
    let steps = (q / grid.spacing()).round() as i64;
    let applied = steps as f64 * grid.spacing();
    let n = grid.n_points() as i64;
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let mut lost = 0.0;
    for (j, &c) in psi.amplitudes.iter().enumerate() {
        let target = j as i64 + steps;
        if (0..n).contains(&target) {
            out[target as usize] = c;
        } else {
            lost += c.norm_sqr();
        }
    }
    let lost_norm = lost * grid.spacing();
    if lost_norm > KICK_LOSS_TOLERANCE {
        return Err(Error::KickOffGrid { lost_norm });
    }
    Ok((
        Wavepacket { grid: grid.clone(), amplitudes: out },
        Kick { applied, residual: q - applied, lost_norm },
    ))
}

/// Free flight for time `t`: `c'(p) = c(p) e^{-i p² t / (2 m ħ)}`.
pub fn free_propagate(psi: &Wavepacket, t: f64, mass: f64) -> Result<Wavepacket> {
    let mut out = psi.clone();
    free_propagate_in_place(&mut out.amplitudes, &psi.grid, t, mass)?;
    Ok(out)
}

pub(crate) fn free_propagate_in_place(
    amplitudes: &mut [Complex64],
    grid: &MomentumGrid,
    t: f64,
    mass: f64,
) -> Result<()> {
    non_negative("t", t)?;
    positive("mass", mass)?;
    if t == 0.0 {
        return Ok(());
    }
    let k0 = grid.k0();
    let omega_r = HBAR * k0 * k0 / (2.0 * mass);
    for (j, c) in amplitudes.iter_mut().enumerate() {
        let p = grid.momentum(j);
        *c *= Complex64::from_polar(1.0, -p * p * omega_r * t);
    }
    Ok(())
}

/// Anything with a momentum density on a grid.
pub trait MomentumDensity {
    fn grid(&self) -> &MomentumGrid;
    /// Density on the grid, normalised as `Σ ρ Δp = 1` for a normalised state.
    fn momentum_density(&self) -> Vec<f64>;
}

impl MomentumDensity for Wavepacket {
    fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    fn momentum_density(&self) -> Vec<f64> {
        self.density()
    }
}

pub fn momentum_density<S: MomentumDensity + ?Sized>(state: &S) -> Vec<f64> {
    state.momentum_density()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{grid::make_grid, ExperimentParams};
    use proptest::prelude::*;

    fn grid() -> MomentumGrid {
        make_grid(4096, 8.0, ExperimentParams::default().k0()).unwrap()
    }

    #[test]
    fn gaussian_is_normalised() {
        let psi = build_wavepacket(&WavepacketSpec::gaussian(0.1, 0.0), &grid()).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_packet_is_centred_at_d() {
        let g = grid();
        let psi = build_wavepacket(&WavepacketSpec::gaussian(0.1, 2.8e-6), &g).unwrap();
        let (z, width) = psi.position_moments();
        assert!((z - 2.8e-6).abs() < g.position_spacing(), "<z> = {z}");
        // σz = 1/(2 σp k0)
        let expected = 1.0 / (2.0 * 0.1 * g.k0());
        assert!((width - expected).abs() < 1e-3 * expected);
        assert!(psi.mean_momentum().abs() < 1e-12);
    }

    #[test]
    fn chirp_keeps_mean_momentum_zero() {
        let spec = WavepacketSpec { phase: PhaseModel::Quadratic { beta: 7.0 }, ..WavepacketSpec::gaussian(0.2, 5e-6) };
        let psi = build_wavepacket(&spec, &grid()).unwrap();
        assert!(psi.mean_momentum().abs() < 1e-12);
    }

    #[test]
    fn rejects_unresolvable_width() {
        let g = grid();
        assert!(matches!(
            build_wavepacket(&WavepacketSpec::gaussian(0.01, 0.0), &g),
            Err(Error::UnresolvableWidth { .. })
        ));
        assert!(matches!(
            build_wavepacket(&WavepacketSpec::gaussian(3.0, 0.0), &g),
            Err(Error::UnresolvableWidth { .. })
        ));
    }

    #[test]
    fn measured_profile() {
        let g = grid();
        let ps: Vec<f64> = (0..=200).map(|i| -2.0 + 0.02 * i as f64).collect();
        let dens: Vec<f64> = ps.iter().map(|p| (-p * p / (2.0 * 0.04)).exp()).collect();
        let spec = WavepacketSpec {
            profile: Profile::Measured(MomentumTable::new(ps.clone(), dens).unwrap()),
            ..WavepacketSpec::gaussian(0.2, 3e-6)
        };
        let psi = build_wavepacket(&spec, &g).unwrap();
        let (_, width) = density_moments(&g, &psi.density());
        assert!((width - 0.2).abs() < 1e-3);

        let flat = alloc::vec![1.0; ps.len()];
        let bad = WavepacketSpec {
            profile: Profile::Measured(MomentumTable::new(ps, flat).unwrap()),
            ..WavepacketSpec::default()
        };
        assert!(matches!(build_wavepacket(&bad, &g), Err(Error::ProfileCoverage { .. })));
        assert!(MomentumTable::new(alloc::vec![0.0, 1.0], alloc::vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn kick_moves_delta_packet() {
        let g = make_grid(1024, 8.0, 1.0).unwrap();
        let mut c = alloc::vec![Complex64::new(0.0, 0.0); 1024];
        c[512] = Complex64::new(1.0 / g.spacing().sqrt(), 0.0);
        let psi = Wavepacket::from_amplitudes(g.clone(), c).unwrap();
        let (kicked, kick) = apply_momentum_kick(&psi, 1.0).unwrap();
        assert_eq!(kick.residual, 0.0);
        let peak = kicked.density().iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(g.momentum(peak), 1.0);
        let (_, kick) = apply_momentum_kick(&psi, 1.0 + 0.3 * g.spacing()).unwrap();
        assert!((kick.residual - 0.3 * g.spacing()).abs() < 1e-12);
    }

    #[test]
    fn kick_limits() {
        let psi = build_wavepacket(&WavepacketSpec::gaussian(0.5, 0.0), &grid()).unwrap();
        assert!(matches!(apply_momentum_kick(&psi, 4.5), Err(Error::KickTooLarge { .. })));
        let wide = build_wavepacket(&WavepacketSpec::gaussian(2.0, 0.0), &grid()).unwrap();
        assert!(matches!(apply_momentum_kick(&wide, 4.0), Err(Error::KickOffGrid { .. })));
    }

    #[test]
    fn ehrenfest_drift_over_one_millisecond() {
        let g = grid();
        let params = ExperimentParams::default();
        let spec = WavepacketSpec { center_momentum: 1.0, ..WavepacketSpec::gaussian(0.2, 0.0) };
        let psi = build_wavepacket(&spec, &g).unwrap();
        let t = 1e-3;
        let moved = free_propagate(&psi, t, params.mass).unwrap();
        let shift = moved.mean_position() - psi.mean_position();
        let expected = params.recoil_velocity() * t;
        assert!((shift - expected).abs() < 1e-9 * 1e3 * expected, "{shift} vs {expected}");
        assert!((expected - 12.56e-6).abs() < 0.01e-6);
        assert_eq!(moved.density().len(), psi.density().len());
        for (a, b) in moved.density().iter().zip(psi.density()) {
            assert!((a - b).abs() <= 1e-15 * b.max(1.0));
        }
        assert_eq!(free_propagate(&psi, 0.0, params.mass).unwrap(), psi);
        assert!(free_propagate(&psi, -1.0, params.mass).is_err());
    }

    proptest! {
        #[test]
        fn kicks_compose_and_preserve_norm(
            sigma in 0.1f64..0.5, d in 0.0f64..10e-6, q1 in -20i64..20, q2 in -20i64..20, beta in -5.0f64..5.0
        ) {
            let g = make_grid(1024, 8.0, ExperimentParams::default().k0()).unwrap();
            let spec = WavepacketSpec { phase: PhaseModel::Quadratic { beta }, ..WavepacketSpec::gaussian(sigma, d) };
            let psi = build_wavepacket(&spec, &g).unwrap();
            let (a, b) = (q1 as f64 * 0.0625, q2 as f64 * 0.0625);
            let (k1, _) = apply_momentum_kick(&psi, a).unwrap();
            let (k12, _) = apply_momentum_kick(&k1, b).unwrap();
            let (k, _) = apply_momentum_kick(&psi, a + b).unwrap();
            for (x, y) in k12.amplitudes().iter().zip(k.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-15);
            }
            prop_assert!((k12.norm_sqr() - 1.0).abs() < 1e-12);
            let (back, _) = apply_momentum_kick(&k1, -a).unwrap();
            for (x, y) in back.amplitudes().iter().zip(psi.amplitudes()) {
                prop_assert!((x - y).norm() < 1e-15);
            }
        }

        #[test]
        fn propagation_is_unitary(sigma in 0.1f64..0.5, t in 0.0f64..5e-3) {
            let g = make_grid(1024, 8.0, ExperimentParams::default().k0()).unwrap();
            let psi = build_wavepacket(&WavepacketSpec::gaussian(sigma, 1e-6), &g).unwrap();
            let out = free_propagate(&psi, t, ExperimentParams::default().mass).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn position_round_trip(sigma in 0.1f64..0.5, d in 0.0f64..20e-6) {
            let g = make_grid(1024, 8.0, ExperimentParams::default().k0()).unwrap();
            let psi = build_wavepacket(&WavepacketSpec::gaussian(sigma, d), &g).unwrap();
            let back = Wavepacket::from_position(g.clone(), &psi.to_position()).unwrap();
            for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
