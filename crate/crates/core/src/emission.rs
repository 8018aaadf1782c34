//! The spontaneous-emission event in front of the mirror.
//!
//! The quantum model writes the motional state after the photon has left as
//! a mixture over the photon's mirror-normal direction cosine `u ∈ (0, 1]`:
//!
//! ```text
//! ρ = α ∫ du [ (3/8)      |ψs,u⟩⟨ψs,u| + (3/8) u² |ψp,u⟩⟨ψp,u| ]
//! ψs,u = ( rs* e^{+i k0 u z} + e^{-i k0 u z}) ψ0
//! ψp,u = (-rp* e^{+i k0 u z} + e^{-i k0 u z}) ψ0
//! ```
//!
//! Each branch is a superposition of an upward and a downward recoil whose
//! relative phase is imprinted by the distance to the mirror. The integral
//! is discretised with Gauss-Legendre nodes and the mixture is stored as a
//! weighted list of normalised members, never as a density matrix.
//!
//! The semiclassical model instead counts an emission as coherent when the
//! absorption disk of the atom overlaps the disk of its mirror image as seen
//! along the photon direction.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::MomentumGrid;
use crate::params::{non_negative, ExperimentParams};
use crate::quadrature::Rule;
use crate::wavepacket::{position_moments, probability_behind_mirror, MomentumDensity, Wavepacket};
use crate::{Error, Result};

/// Probability behind the mirror above which an initial state is rejected.
pub const BEHIND_MIRROR_TOLERANCE: f64 = 1e-6;
/// Members whose squared norm falls below this are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Gauss-Legendre nodes per panel of the resolved rule.
pub const PANEL_NODES: usize = 8;
/// Largest phase swing of `e^{2iuk0z}` across one panel, in radians.
const PANEL_PHASE: f64 = 6.0;

/// How the `u` integral is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    /// One Gauss-Legendre rule with `n_u` nodes on `(0, 1]`.
    GaussLegendre,
    /// Composite Gauss-Legendre with 8-node panels, enough of them that the
    /// branch phase `2 u k0 z` changes by at most 6 rad per panel over the
    /// extent of the packet, and never fewer than `n_u` nodes in total.
    Resolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionConfig {
    pub r_s: Complex64,
    pub r_p: Complex64,
    pub n_u: usize,
    pub rule: QuadratureRule,
}

impl Default for EmissionConfig {
    fn default() -> Self {
        Self {
            r_s: Complex64::new(-1.0, 0.0),
            r_p: Complex64::new(1.0, 0.0),
            n_u: 64,
            rule: QuadratureRule::Resolved,
        }
    }
}

impl EmissionConfig {
    /// Default discretisation with the mirror of `params`.
    pub fn from_params(params: &ExperimentParams) -> Self {
        Self { r_s: params.r_s, r_p: params.r_p, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("r_s", self.r_s), ("r_p", self.r_p)] {
            if !(r.norm() <= 1.0 + 1e-12) {
                return Err(Error::InvalidParameter { name, reason: format!("|{name}| = {} exceeds 1", r.norm()) });
            }
        }
        if self.n_u < 16 {
            return Err(Error::InvalidParameter { name: "n_u", reason: format!("must be >= 16, got {}", self.n_u) });
        }
        Ok(())
    }

    /// Nodes and weights on `(0, 1]` for a packet with the given position
    /// density.
    fn rule_for(&self, grid: &MomentumGrid, position_density: &[f64]) -> Rule {
        match self.rule {
            QuadratureRule::GaussLegendre => Rule::gauss_legendre(self.n_u, 0.0, 1.0),
            QuadratureRule::Resolved => {
                let (mean, width) = position_moments(grid, position_density);
                let xi_max = ((mean + 8.0 * width) * grid.k0()).max(0.0);
                let panels = self.n_u.div_ceil(PANEL_NODES).max((2.0 * xi_max / PANEL_PHASE).ceil() as usize);
                Rule::composite(panels, PANEL_NODES, 0.0, 1.0)
            }
        }
    }
}

/// Which term of the emission channel a member comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    /// Transverse-electric mode, weight `(3/8) du`.
    S,
    /// Transverse-magnetic mode, weight `(3/8) u² du`.
    P,
    /// A member that did not come from an emission.
    Pure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub branch: Branch,
    /// Direction cosine of the emitted photon (0 for [`Branch::Pure`]).
    pub u: f64,
    pub weight: f64,
    pub state: Wavepacket,
}

/// A density operator stored as a convex combination of pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    members: Vec<Member>,
    alpha: f64,
    dropped_weight: f64,
}

impl MixedState {
    pub fn pure(state: Wavepacket) -> Self {
        Self {
            members: alloc::vec![Member { branch: Branch::Pure, u: 0.0, weight: 1.0, state }],
            alpha: 1.0,
            dropped_weight: 0.0,
        }
    }

    /// Mixture of the given members with weights rescaled to sum to one.
    pub fn from_members(mut members: Vec<Member>) -> Result<Self> {
        let grid = members.first().ok_or(Error::Empty("mixed state"))?.state.grid().clone();
        if members.iter().any(|m| m.state.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        if members.iter().any(|m| !(m.weight >= 0.0) || !m.weight.is_finite()) {
            return Err(Error::InvalidParameter { name: "weight", reason: "weights must be finite and >= 0".into() });
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        if !(total > 0.0) {
            return Err(Error::Normalization { what: "mixture weights", value: total });
        }
        members.iter_mut().for_each(|m| m.weight /= total);
        Ok(Self { members, alpha: 1.0, dropped_weight: 0.0 })
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Member] {
        &mut self.members
    }

    /// Normalisation constant `α` of the emission channel.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Fraction of the raw channel weight removed by pruning.
    pub fn dropped_weight(&self) -> f64 {
        self.dropped_weight
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|m| m.weight).sum()
    }

    /// `Σ w_i ⟨ψ_i|ψ_i⟩`, the trace of the represented operator.
    pub fn trace(&self) -> f64 {
        self.members.iter().map(|m| m.weight * m.state.norm_sqr()).sum()
    }
}

impl MomentumDensity for MixedState {
    fn grid(&self) -> &MomentumGrid {
        self.members[0].state.grid()
    }

    fn momentum_density(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.grid().n_points()];
        for m in &self.members {
            for (o, c) in out.iter_mut().zip(m.state.amplitudes()) {
                *o += m.weight * c.norm_sqr();
            }
        }
        out
    }
}

/// Bookkeeping of one pass over the emission channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionSummary {
    /// `1 / Σ raw weights`.
    pub alpha: f64,
    /// Sum of the raw weights of the members that were kept.
    pub kept_raw_weight: f64,
    /// Fraction of the raw weight that was pruned.
    pub dropped_weight: f64,
    pub members: usize,
    pub nodes: usize,
}

/// `e^{i u ξ_k}` for all grid samples; anchored every 64 samples so the
/// rotation recurrence never drifts.
fn fill_phasors(grid: &MomentumGrid, u: f64, out: &mut [Complex64]) {
    let step = Complex64::from_polar(1.0, u * PI / grid.p_max());
    let mut z = Complex64::new(1.0, 0.0);
    for (k, o) in out.iter_mut().enumerate() {
        if k % 64 == 0 {
            z = Complex64::from_polar(1.0, u * grid.xi(k));
        }
        *o = z;
        z *= step;
    }
}

struct Prepared {
    samples: Vec<Complex64>,
    rule: Rule,
}

fn prepare(psi0: &Wavepacket, cfg: &EmissionConfig, check_half_space: bool) -> Result<Prepared> {
    cfg.validate()?;
    let norm = psi0.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization { what: "initial wavepacket", value: norm });
    }
    let grid = psi0.grid();
    let samples = psi0.to_position();
    let density: Vec<f64> = samples.iter().map(|x| x.norm_sqr()).collect();
    if check_half_space {
        let behind = probability_behind_mirror(grid, &density);
        if behind >= BEHIND_MIRROR_TOLERANCE {
            return Err(Error::BehindMirror { probability: behind });
        }
    }
    let rule = cfg.rule_for(grid, &density);
    Ok(Prepared { samples, rule })
}

/// Runs the emission channel on `psi0` and hands every normalised member to
/// `sink` together with its raw (un-normalised) weight, without ever holding
/// the whole mixture in memory. Members arrive node by node, `S` before `P`.
pub fn for_each_member(
    psi0: &Wavepacket,
    cfg: &EmissionConfig,
    mut sink: impl FnMut(Branch, f64, f64, Wavepacket),
) -> Result<EmissionSummary> {
    let Prepared { samples, rule } = prepare(psi0, cfg, true)?;
    let grid = psi0.grid();
    let dz = grid.position_spacing();
    let a_s = cfg.r_s.conj();
    let a_p = -cfg.r_p.conj();
    let mut phasors = alloc::vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let (mut total, mut kept, mut dropped) = (0.0, 0.0, 0.0);
    let mut members = 0;
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        fill_phasors(grid, u, &mut phasors);
        for (branch, a, kernel) in [(Branch::S, a_s, 0.375 * w), (Branch::P, a_p, 0.375 * u * u * w)] {
            let mut branch_state: Vec<Complex64> =
                samples.iter().zip(&phasors).map(|(&psi, &e)| (a * e + e.conj()) * psi).collect();
            let norm = branch_state.iter().map(|x| x.norm_sqr()).sum::<f64>() * dz;
            let raw = kernel * norm;
            total += raw;
            if norm < PRUNE_THRESHOLD {
                dropped += raw;
                log::debug!("pruned {branch:?} member at u = {u}: norm {norm:e}");
                continue;
            }
            let s = 1.0 / norm.sqrt();
            branch_state.iter_mut().for_each(|x| *x *= s);
            grid.to_momentum_in_place(&mut branch_state);
            kept += raw;
            members += 1;
            sink(branch, u, raw, Wavepacket::from_amplitudes(grid.clone(), branch_state)?);
        }
    }
    if !(total > 0.0) {
        return Err(Error::Normalization { what: "emission channel", value: total });
    }
    if dropped > 0.0 {
        log::info!("emission pruned {:.3e} of the channel weight", dropped / total);
    }
    Ok(EmissionSummary {
        alpha: 1.0 / total,
        kept_raw_weight: kept,
        dropped_weight: dropped / total,
        members,
        nodes: rule.len(),
    })
}

/// The post-emission state of `psi0` as a weighted ensemble ordered by
/// branch, then by `u`.
pub fn emit_mixture(psi0: &Wavepacket, cfg: &EmissionConfig, params: &ExperimentParams) -> Result<MixedState> {
    params.validate()?;
    check_grid_k0(psi0.grid(), params)?;
    let mut members = Vec::new();
    let summary = for_each_member(psi0, cfg, |branch, u, raw, state| {
        members.push(Member { branch, u, weight: raw, state });
    })?;
    if members.is_empty() {
        return Err(Error::Empty("emission ensemble"));
    }
    members.sort_by(|a, b| a.branch.cmp(&b.branch).then(a.u.total_cmp(&b.u)));
    members.iter_mut().for_each(|m| m.weight /= summary.kept_raw_weight);
    Ok(MixedState { members, alpha: summary.alpha, dropped_weight: summary.dropped_weight })
}

pub(crate) fn check_grid_k0(grid: &MomentumGrid, params: &ExperimentParams) -> Result<()> {
    let k0 = params.k0();
    if (grid.k0() - k0).abs() > 1e-12 * k0 {
        return Err(Error::InvalidParameter {
            name: "k0",
            reason: format!("grid uses k0 = {} but the wavelength gives {k0}", grid.k0()),
        });
    }
    Ok(())
}

/// Raw channel weights `(branch, u, weight)` of every node, without the
/// half-space precondition and without normalisation. Useful to inspect
/// image quenching for a packet sitting on the mirror.
pub fn branch_raw_weights(psi0: &Wavepacket, cfg: &EmissionConfig) -> Result<Vec<(Branch, f64, f64)>> {
    let Prepared { samples, rule } = prepare(psi0, cfg, false)?;
    let grid = psi0.grid();
    let dz = grid.position_spacing();
    let (a_s, a_p) = (cfg.r_s.conj(), -cfg.r_p.conj());
    let mut phasors = alloc::vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let mut out = Vec::with_capacity(2 * rule.len());
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        fill_phasors(grid, u, &mut phasors);
        for (branch, a, kernel) in [(Branch::S, a_s, 0.375 * w), (Branch::P, a_p, 0.375 * u * u * w)] {
            let norm: f64 =
                samples.iter().zip(&phasors).map(|(&psi, &e)| ((a * e + e.conj()) * psi).norm_sqr()).sum::<f64>() * dz;
            out.push((branch, u, kernel * norm));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(out)
}

/// Fringe visibility of a point atom at distance `d` when the recoil is
/// averaged uniformly over `u ∈ [1 - Δu, 1]` with `|rs| = 1`:
/// `|sinc(k0 Δu d)|`.
pub fn coherence_vs_distance_pointatom(d: f64, delta_u: f64, params: &ExperimentParams) -> Result<f64> {
    non_negative("d", d)?;
    check_delta_u(delta_u)?;
    let x = params.k0() * delta_u * d;
    Ok(if x == 0.0 { 1.0 } else { (x.sin() / x).abs() })
}

fn check_delta_u(delta_u: f64) -> Result<()> {
    if delta_u > 0.0 && delta_u <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "delta_u", reason: format!("must lie in (0, 1], got {delta_u}") })
    }
}

/// Branch coherence of the emitted ensemble restricted to photon directions
/// `u ∈ [1 - Δu, 1]`, read out by an ideal recombiner that maps each `+u`
/// recoil onto its `-u` partner:
///
/// ```text
/// V = 2 |Σ W a ⟨ψ0| e^{2 i u k0 z} |ψ0⟩| / Σ W (|a|² + 1)
/// ```
///
/// with `a = rs*`, `W = (3/8) w` for the s branch and `a = -rp*`,
/// `W = (3/8) u² w` for the p branch. For a point-like `ψ0` this follows the
/// `|sinc(k0 Δu d)|` envelope.
pub fn direction_resolved_visibility(
    psi0: &Wavepacket,
    cfg: &EmissionConfig,
    delta_u: f64,
    n_nodes: usize,
) -> Result<f64> {
    check_delta_u(delta_u)?;
    let Prepared { samples, .. } = prepare(psi0, cfg, false)?;
    let grid = psi0.grid();
    let dz = grid.position_spacing();
    let density: Vec<f64> = samples.iter().map(|x| x.norm_sqr()).collect();
    let rule = Rule::composite(n_nodes.div_ceil(PANEL_NODES).max(1), PANEL_NODES, 1.0 - delta_u, 1.0);
    let (a_s, a_p) = (cfg.r_s.conj(), -cfg.r_p.conj());
    let mut phasors = alloc::vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let mut coherence = Complex64::new(0.0, 0.0);
    let mut population = 0.0;
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        fill_phasors(grid, 2.0 * u, &mut phasors);
        let g: Complex64 = density.iter().zip(&phasors).map(|(&rho, &e)| e * rho).sum::<Complex64>() * dz;
        for (a, weight) in [(a_s, 0.375 * w), (a_p, 0.375 * u * u * w)] {
            coherence += g * a * weight;
            population += weight * (a.norm_sqr() + 1.0);
        }
    }
    Ok(2.0 * coherence.norm() / population)
}

/// Geometry of the semiclassical disk model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalConfig {
    /// Resonant absorption cross section `3λ²/2π` [m²].
    pub cross_section: f64,
    /// Radius of a disk with that area [m].
    pub radius: f64,
}

impl SemiclassicalConfig {
    pub fn for_wavelength(wavelength: f64) -> Self {
        let cross_section = 3.0 * wavelength * wavelength / (2.0 * PI);
        Self { cross_section, radius: (cross_section / PI).sqrt() }
    }

    pub fn from_params(params: &ExperimentParams) -> Self {
        Self::for_wavelength(params.wavelength)
    }
}

/// Fraction of the atom's disk covered by the image disk when both are
/// projected along a photon at polar angle `theta` from the mirror normal.
pub fn disk_overlap_fraction(d: f64, theta: f64, sc: &SemiclassicalConfig) -> f64 {
    lens_fraction(2.0 * d * theta.sin(), sc.radius)
}

/// Lens area of two disks of radius `r` at centre separation `s`, in units
/// of the disk area.
fn lens_fraction(s: f64, r: f64) -> f64 {
    let x = (s.abs() / (2.0 * r)).min(1.0);
    (2.0 * x.acos() - 2.0 * x * (1.0 - x * x).sqrt()) / PI
}

/// Semiclassical coherent fraction for the outermost momentum class: the
/// disk overlap averaged over photon directions `u ∈ [1 - Δu, 1]` with the
/// dipole weight `1 + u²`, and uniformly over atom distances in
/// `[d̄ - w/2, d̄ + w/2]` clipped at the mirror.
pub fn semiclassical_visibility(
    mean_distance: f64,
    sc: &SemiclassicalConfig,
    delta_u: f64,
    beam_width: f64,
) -> Result<f64> {
    non_negative("mean_distance", mean_distance)?;
    non_negative("beam_width", beam_width)?;
    check_delta_u(delta_u)?;
    let u_rule = Rule::composite(32, PANEL_NODES, 1.0 - delta_u, 1.0);
    let at_distance = |d: f64| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&u, &w) in u_rule.nodes.iter().zip(&u_rule.weights) {
            let weight = w * (1.0 + u * u);
            num += weight * lens_fraction(2.0 * d * (1.0 - u * u).max(0.0).sqrt(), sc.radius);
            den += weight;
        }
        num / den
    };
    let lo = (mean_distance - beam_width / 2.0).max(0.0);
    let hi = mean_distance + beam_width / 2.0;
    if hi - lo <= 0.0 {
        return Ok(at_distance(mean_distance));
    }
    let d_rule = Rule::composite(64, PANEL_NODES, lo, hi);
    Ok(d_rule.integrate(at_distance) / (hi - lo))
}
