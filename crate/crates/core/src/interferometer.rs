//! Bragg recombination, free flight, momentum-resolved detection and the
//! average over the transverse extent of the atomic beam.
//!
//! The grating couples each momentum `q` to `q - T` with `T = 2 kB / k0`
//! (in units of ħk0). Grid points are grouped into disjoint pairs: a point
//! is the upper partner when `q mod 2T ∈ [0, T)`, so for `|q| < T` the
//! partner is `q - T sign(q)`. Within a pair the map is
//!
//! ```text
//! lower' = t* lower + r e^{+iφB} upper
//! upper' = r e^{-iφB} lower + t upper
//! ```
//!
//! with the two-level Rabi amplitudes evaluated at the pair detuning. The
//! phase convention is `φB = 2 kB L` for a retro-mirror displacement `L`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::{Euclid, Float};

use crate::emission::{self, for_each_member, EmissionConfig, Member, MixedState};
use crate::grid::MomentumGrid;
use crate::params::{positive, ExperimentParams};
use crate::wavepacket::{build_wavepacket, free_propagate_in_place, MomentumDensity, Wavepacket, WavepacketSpec};
use crate::{Error, Result};

/// Interferometer phase produced by moving the grating retro-mirror by `l`.
pub fn phase_from_mirror_shift(k_b: f64, l: f64) -> f64 {
    2.0 * k_b * l
}

/// Splitting-ratio model of the grating.
#[derive(Debug, Clone, PartialEq)]
pub enum Acceptance {
    /// Two-level Rabi formula with the coupling and pulse length of the splitter.
    Rabi,
    /// Measured `|r|²` against the momentum of the upper state of a pair,
    /// interpolated linearly and zero outside the table; `t` is taken real.
    Tabulated { momenta: Vec<f64>, reflectivity: Vec<f64> },
}

/// Standing-light-wave beamsplitter.
#[derive(Debug, Clone, PartialEq)]
pub struct BraggSplitter {
    /// Grating wavevector `kB` [rad/m].
    pub k_b: f64,
    /// Two-photon Rabi frequency `Ω` [rad/s].
    pub omega: f64,
    /// Interaction time `τ` [s].
    pub tau: f64,
    /// Interferometer phase `φB` [rad].
    pub phase: f64,
    pub acceptance: Acceptance,
}

/// `|r|²` of a Rabi pulse of area `a` at reduced detuning `y = δτ`.
fn rabi_reflectivity(area: f64, y: f64) -> f64 {
    let w = (area * area + y * y).sqrt();
    let s = (w / 2.0).sin();
    area * area / (w * w) * s * s
}

/// Reduced detuning `y = δτ` at which `|r|²` first falls to half its
/// resonant value.
fn rabi_half_width(area: f64) -> f64 {
    let half = rabi_reflectivity(area, 0.0) / 2.0;
    let mut lo = 0.0;
    let mut hi = 0.01;
    while rabi_reflectivity(area, hi) > half {
        lo = hi;
        hi += 0.01;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rabi_reflectivity(area, mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl BraggSplitter {
    /// Rabi splitter of pulse area `area = Ωτ` whose `|r(p)|²` has the given
    /// full width at half maximum [ħk0].
    pub fn calibrated(k_b: f64, area: f64, fwhm: f64, params: &ExperimentParams) -> Result<Self> {
        positive("k_b", k_b)?;
        positive("acceptance_fwhm", fwhm)?;
        if !(area > 0.0 && area <= PI) {
            return Err(Error::InvalidParameter { name: "pulse_area", reason: format!("must lie in (0, pi], got {area}") });
        }
        let transfer = 2.0 * k_b / params.k0();
        let tau = rabi_half_width(area) / (transfer * params.recoil_frequency() * fwhm);
        Ok(Self { k_b, omega: area / tau, tau, phase: 0.0, acceptance: Acceptance::Rabi })
    }

    /// `π/2` pulse at `kB = k0` with a 1 ħk0 acceptance.
    pub fn default_for(params: &ExperimentParams) -> Self {
        Self::calibrated(params.k0(), PI / 2.0, 1.0, params).expect("default splitter is valid")
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self { phase, ..self.clone() }
    }

    pub fn pulse_area(&self) -> f64 {
        self.omega * self.tau
    }

    /// Two-photon transfer `2 kB / k0` [ħk0].
    pub fn transfer(&self, k0: f64) -> f64 {
        2.0 * self.k_b / k0
    }

    pub fn validate(&self) -> Result<()> {
        positive("k_b", self.k_b)?;
        positive("tau", self.tau)?;
        positive("omega", self.omega)?;
        let area = self.pulse_area();
        if !(area > 0.0 && area <= PI * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter { name: "pulse_area", reason: format!("Omega*tau must lie in (0, pi], got {area}") });
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter { name: "phase", reason: "must be finite".into() });
        }
        if let Acceptance::Tabulated { momenta, reflectivity } = &self.acceptance {
            if momenta.len() != reflectivity.len() || momenta.len() < 2 || momenta.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidParameter {
                    name: "acceptance",
                    reason: "table needs >= 2 strictly increasing momenta with one reflectivity each".into(),
                });
            }
            if reflectivity.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                return Err(Error::InvalidParameter { name: "acceptance", reason: "reflectivities must lie in [0, 1]".into() });
            }
        }
        Ok(())
    }

    /// Full width at half maximum of `|r(p)|²` [ħk0].
    pub fn acceptance_fwhm(&self, params: &ExperimentParams) -> f64 {
        match &self.acceptance {
            Acceptance::Rabi => {
                let y = rabi_half_width(self.pulse_area());
                y / (self.transfer(params.k0()) * params.recoil_frequency() * self.tau)
            }
            Acceptance::Tabulated { momenta, reflectivity } => {
                crate::analysis::fwhm(momenta, reflectivity).unwrap_or(f64::NAN)
            }
        }
    }
}

/// Pair partner of momentum `p` and whether `p` is the upper state.
fn partner(p: f64, transfer: f64) -> (f64, bool) {
    if Euclid::rem_euclid(&p, &(2.0 * transfer)) < transfer {
        (p - transfer, true)
    } else {
        (p + transfer, false)
    }
}

fn upper_amplitudes(q_upper: f64, splitter: &BraggSplitter, params: &ExperimentParams) -> (Complex64, Complex64) {
    let transfer = splitter.transfer(params.k0());
    match &splitter.acceptance {
        Acceptance::Rabi => {
            let q_lower = q_upper - transfer;
            let delta = (q_upper * q_upper - q_lower * q_lower) * params.recoil_frequency();
            let omega_eff = (splitter.omega * splitter.omega + delta * delta).sqrt();
            let (s, c) = (omega_eff * splitter.tau / 2.0).sin_cos();
            (
                Complex64::new(c, delta / omega_eff * s),
                Complex64::new(0.0, -splitter.omega / omega_eff * s),
            )
        }
        Acceptance::Tabulated { momenta, reflectivity } => {
            let r2 = interpolate(momenta, reflectivity, q_upper).clamp(0.0, 1.0);
            (Complex64::new((1.0 - r2).sqrt(), 0.0), Complex64::new(0.0, -r2.sqrt()))
        }
    }
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at < x[0] || at > x[x.len() - 1] {
        return 0.0;
    }
    let i = x.partition_point(|&v| v <= at).clamp(1, x.len() - 1);
    y[i - 1] + (y[i] - y[i - 1]) * (at - x[i - 1]) / (x[i] - x[i - 1])
}

/// Transmission and diffraction amplitudes `(t, r)` seen by momentum `p`.
///
/// The detuning is `δ = (p² - p'²) ω_r` with `p'` the pair partner, so the
/// lower state of a pair sees `t*` of its upper partner. `|t|² + |r|² = 1`.
pub fn bragg_amplitudes(p: f64, splitter: &BraggSplitter, params: &ExperimentParams) -> (Complex64, Complex64) {
    let transfer = splitter.transfer(params.k0());
    let (other, is_upper) = partner(p, transfer);
    if is_upper {
        upper_amplitudes(p, splitter, params)
    } else {
        let (t, r) = upper_amplitudes(other, splitter, params);
        (t.conj(), r)
    }
}

/// Pairing of grid points and the per-pair amplitudes.
#[derive(Debug, Clone)]
struct Pairing {
    /// `(lower, upper, t_upper, r)` for every complete pair on the grid.
    pairs: Vec<(usize, usize, Complex64, Complex64)>,
    /// Points whose partner falls off the grid.
    unpaired: Vec<usize>,
}

impl Pairing {
    fn new(grid: &MomentumGrid, splitter: &BraggSplitter, params: &ExperimentParams) -> Result<Self> {
        splitter.validate()?;
        let transfer = splitter.transfer(params.k0());
        let steps = match grid.steps(transfer) {
            Some(s) if s > 0 => s,
            _ => return Err(Error::TransferOffGrid { transfer, spacing: grid.spacing() }),
        };
        let n = grid.n_points() as i64;
        let mut pairs = Vec::new();
        let mut unpaired = Vec::new();
        for j in 0..n {
            let offset = j - n / 2;
            let is_upper = offset.rem_euclid(2 * steps) < steps;
            let other = if is_upper { j - steps } else { j + steps };
            if !(0..n).contains(&other) {
                unpaired.push(j as usize);
            } else if is_upper {
                let (t, r) = upper_amplitudes(grid.momentum(j as usize), splitter, params);
                pairs.push((other as usize, j as usize, t, r));
            }
        }
        Ok(Self { pairs, unpaired })
    }

    fn apply(&self, amplitudes: &mut [Complex64], phase: f64) {
        let e = Complex64::from_polar(1.0, phase);
        for &(lo, up, t, r) in &self.pairs {
            let (a, b) = (amplitudes[lo], amplitudes[up]);
            amplitudes[lo] = t.conj() * a + r * e * b;
            amplitudes[up] = r * e.conj() * a + t * b;
        }
    }
}

/// Applies the grating (at `splitter.phase`) to every member.
pub fn bragg_split(state: &MixedState, splitter: &BraggSplitter, params: &ExperimentParams) -> Result<MixedState> {
    let grid = state.grid().clone();
    let pairing = Pairing::new(&grid, splitter, params)?;
    let mut out = state.clone();
    for m in out.members_mut() {
        let mut amps = m.state.amplitudes().to_vec();
        pairing.apply(&mut amps, splitter.phase);
        m.state = Wavepacket::from_amplitudes(grid.clone(), amps)?;
    }
    Ok(out)
}

/// Applies free flight for time `t` to every member.
pub fn propagate_mixture(state: &MixedState, t: f64, mass: f64) -> Result<MixedState> {
    let grid = state.grid().clone();
    let mut out = state.clone();
    for m in out.members_mut() {
        let mut amps = m.state.amplitudes().to_vec();
        free_propagate_in_place(&mut amps, &grid, t, mass)?;
        m.state = Wavepacket::from_amplitudes(grid.clone(), amps)?;
    }
    Ok(out)
}

/// Position-resolved detector, modelled directly in momentum space.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    /// Bin width [ħk0]; bins are centred on its integer multiples.
    pub bin_width: f64,
    /// Atoms detected per interferometer phase.
    pub atoms_per_run: f64,
}

impl Default for Detector {
    fn default() -> Self {
        Self { bin_width: 0.125, atoms_per_run: 1e5 }
    }
}

/// Assignment of grid points to detector bins.
///
/// A point lying exactly on a bin edge is shared equally between the two
/// neighbouring bins, which keeps the binning mirror symmetric about `p = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinLayout {
    pub centers: Vec<f64>,
    /// Bin of every grid point (the upper one for edge points).
    pub index: Vec<usize>,
    /// Whether a point sits on the edge below `index`.
    pub on_edge: Vec<bool>,
}

impl BinLayout {
    /// Adds `value` of grid point `j` to `bins`.
    #[inline]
    pub fn deposit<T>(&self, bins: &mut [T], j: usize, value: T)
    where
        T: Copy + core::ops::AddAssign + core::ops::Mul<f64, Output = T>,
    {
        let b = self.index[j];
        if self.on_edge[j] {
            bins[b] += value * 0.5;
            bins[b - 1] += value * 0.5;
        } else {
            bins[b] += value;
        }
    }
}

impl Detector {
    pub fn validate(&self) -> Result<()> {
        positive("bin_width", self.bin_width)?;
        positive("atoms_per_run", self.atoms_per_run)
    }

    /// Bins centred on multiples of the bin width; the two edge bins are
    /// cut by the grid boundary.
    pub fn layout(&self, grid: &MomentumGrid) -> Result<BinLayout> {
        self.validate()?;
        let m = match grid.steps(self.bin_width) {
            Some(m) if m > 0 => m,
            _ => return Err(Error::BinOffGrid { bin_width: self.bin_width, spacing: grid.spacing() }),
        };
        let shifted: Vec<i64> = (0..grid.n_points()).map(|j| 2 * grid.offset(j) + m).collect();
        let raw: Vec<i64> = shifted.iter().map(|&x| i64::div_euclid(x, 2 * m)).collect();
        let on_edge: Vec<bool> = shifted.iter().map(|&x| i64::rem_euclid(x, 2 * m) == 0).collect();
        let first = raw[0] - i64::from(on_edge[0]);
        let last = raw[raw.len() - 1];
        let centers = (first..=last).map(|k| k as f64 * self.bin_width).collect();
        let index = raw.iter().map(|&k| (k - first) as usize).collect();
        Ok(BinLayout { centers, index, on_edge })
    }

    /// Time of flight from emission to the detector [s] (metadata only).
    pub fn flight_time(params: &ExperimentParams) -> f64 {
        params.l_detector / params.v_parallel
    }
}

/// Counts per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
}

/// Bins the ensemble momentum density: `atoms_per_run · Σ_bin ρ Δp`.
pub fn detect<S: MomentumDensity + ?Sized>(state: &S, det: &Detector) -> Result<Histogram> {
    let grid = state.grid();
    let layout = det.layout(grid)?;
    let density = state.momentum_density();
    let mut counts = alloc::vec![0.0; layout.centers.len()];
    let scale = det.atoms_per_run * grid.spacing();
    for (j, rho) in density.iter().enumerate() {
        layout.deposit(&mut counts, j, rho * scale);
    }
    Ok(Histogram { centers: layout.centers, counts })
}

/// Bookkeeping carried along with every fringe series.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub params: ExperimentParams,
    pub mean_distance: f64,
    /// Distance samples that entered the average.
    pub samples_used: usize,
    /// Weight fraction of the beam lost to the mirror.
    pub shadowed_fraction: f64,
    /// Emission normalisation `α` (weighted mean over samples).
    pub alpha: f64,
    /// Pruned emission weight (weighted mean over samples).
    pub dropped_weight: f64,
    /// Ensemble members per sample (largest over samples).
    pub members: usize,
    pub time_to_grating: f64,
    pub time_to_detector: f64,
    pub seed: Option<u64>,
}

/// Counts per momentum bin against interferometer phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeSeries {
    pub phases: Vec<f64>,
    pub bin_centers: Vec<f64>,
    /// `counts[phase][bin]`.
    pub counts: Vec<Vec<f64>>,
    pub metadata: RunMetadata,
}

impl FringeSeries {
    /// Counts of one bin across all phases.
    pub fn bin_series(&self, bin: usize) -> Vec<f64> {
        self.counts.iter().map(|row| row[bin]).collect()
    }

    /// Index of the bin whose centre is closest to `p`.
    pub fn nearest_bin(&self, p: f64) -> usize {
        let mut best = 0;
        for (i, c) in self.bin_centers.iter().enumerate() {
            if (c - p).abs() < (self.bin_centers[best] - p).abs() {
                best = i;
            }
        }
        best
    }

    pub fn total_counts(&self, phase: usize) -> f64 {
        self.counts[phase].iter().sum()
    }
}

/// Momentum classes of the initial beam and the distance sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamAveraging {
    /// Stratified samples across the beam width.
    pub samples: usize,
    /// `(centre momentum offset [ħk0], weight)`; empty means a single class.
    pub momentum_classes: Vec<(f64, f64)>,
}

impl Default for BeamAveraging {
    fn default() -> Self {
        Self { samples: 16, momentum_classes: Vec::new() }
    }
}

/// Everything needed to run the interferometer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ExperimentParams,
    pub grid: MomentumGrid,
    /// Initial packet; its `distance` is replaced by each sampled distance.
    pub packet: WavepacketSpec,
    pub emission: EmissionConfig,
    pub splitter: BraggSplitter,
    pub detector: Detector,
    pub phases: Vec<f64>,
    pub averaging: BeamAveraging,
}

/// `n` equally spaced phases on `[0, 2π)`.
pub fn equispaced_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

impl Scenario {
    /// Defaults for everything not in `params`: a 4096-point grid over
    /// ±8 ħk0, σp = 0.2 ħk0 flat-phase packet, resolved quadrature, π/2
    /// grating with 1 ħk0 acceptance, ħk0/8 bins and 12 phases.
    pub fn new(params: ExperimentParams) -> Result<Self> {
        let grid = MomentumGrid::new(4096, 8.0, params.k0())?;
        Ok(Self {
            grid,
            packet: WavepacketSpec { distance: params.mean_distance, ..WavepacketSpec::default() },
            emission: EmissionConfig::from_params(&params),
            splitter: BraggSplitter::default_for(&params),
            detector: Detector::default(),
            phases: equispaced_phases(12),
            averaging: BeamAveraging::default(),
            params,
        })
    }

    pub fn with_mean_distance(&self, d: f64) -> Self {
        let mut s = self.clone();
        s.params.mean_distance = d;
        s.packet.distance = d;
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        emission::check_grid_k0(&self.grid, &self.params)?;
        self.emission.validate()?;
        self.splitter.validate()?;
        self.detector.layout(&self.grid)?;
        if self.phases.is_empty() {
            return Err(Error::Empty("phase list"));
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter { name: "phases", reason: "phases must be finite".into() });
        }
        if self.averaging.samples == 0 {
            return Err(Error::InvalidParameter { name: "samples", reason: "need at least one beam sample".into() });
        }
        for &(offset, weight) in &self.averaging.momentum_classes {
            if !offset.is_finite() || !(weight >= 0.0) || !weight.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "momentum_classes",
                    reason: format!("bad class ({offset}, {weight})"),
                });
            }
        }
        if !self.averaging.momentum_classes.is_empty() && self.averaging.momentum_classes.iter().all(|c| c.1 == 0.0) {
            return Err(Error::InvalidParameter { name: "momentum_classes", reason: "all weights are zero".into() });
        }
        Ok(())
    }

    fn metadata(&self) -> RunMetadata {
        RunMetadata {
            params: self.params.clone(),
            mean_distance: self.params.mean_distance,
            samples_used: 1,
            shadowed_fraction: 0.0,
            alpha: 1.0,
            dropped_weight: 0.0,
            members: 0,
            time_to_grating: self.params.time_to_grating(),
            time_to_detector: Detector::flight_time(&self.params),
            seed: None,
        }
    }
}

/// Per-bin accumulation of `N(φ) = N0 + Re(e^{iφ} X)`.
struct FringeAccumulator {
    constant: Vec<f64>,
    oscillating: Vec<Complex64>,
    weight: f64,
}

impl FringeAccumulator {
    fn new(bins: usize) -> Self {
        Self { constant: alloc::vec![0.0; bins], oscillating: alloc::vec![Complex64::new(0.0, 0.0); bins], weight: 0.0 }
    }

    fn add(&mut self, weight: f64, c: &[Complex64], pairing: &Pairing, layout: &BinLayout) {
        self.weight += weight;
        for &(lo, up, t, r) in &pairing.pairs {
            let (a, b) = (c[lo], c[up]);
            let (pa, pb) = (a.norm_sqr(), b.norm_sqr());
            let (tt, rr) = (t.norm_sqr(), r.norm_sqr());
            let cross = t * a.conj() * b * 2.0;
            layout.deposit(&mut self.constant, lo, weight * (tt * pa + rr * pb));
            layout.deposit(&mut self.constant, up, weight * (rr * pa + tt * pb));
            layout.deposit(&mut self.oscillating, lo, cross * r * weight);
            layout.deposit(&mut self.oscillating, up, cross * r.conj() * weight);
        }
        for &j in &pairing.unpaired {
            layout.deposit(&mut self.constant, j, weight * c[j].norm_sqr());
        }
    }

    fn counts(&self, phases: &[f64], scale: f64) -> Vec<Vec<f64>> {
        let s = scale / self.weight;
        phases
            .iter()
            .map(|&phi| {
                let e = Complex64::from_polar(1.0, phi);
                self.constant
                    .iter()
                    .zip(&self.oscillating)
                    .map(|(&n0, &x)| ((n0 + (e * x).re) * s).max(0.0))
                    .collect()
            })
            .collect()
    }
}

/// One pass of the interferometer for an atom starting at distance `d`
/// (and initial momentum offset `center_momentum`): emission, drift to the
/// grating, grating at every phase of the scenario, drift to the detector,
/// detection.
///
/// Members are streamed one at a time and every phase is evaluated from the
/// exact decomposition `N(φ) = N0 + Re(e^{iφ} X)` of each bin; the drift
/// after the grating is a pure momentum phase and leaves the counts as they
/// are.
pub fn run_sequence_at(scenario: &Scenario, d: f64, center_momentum: f64) -> Result<FringeSeries> {
    scenario.validate()?;
    let grid = &scenario.grid;
    let spec = WavepacketSpec {
        distance: d,
        center_momentum: scenario.packet.center_momentum + center_momentum,
        ..scenario.packet.clone()
    };
    let psi0 = build_wavepacket(&spec, grid)?;
    let pairing = Pairing::new(grid, &scenario.splitter, &scenario.params)?;
    let layout = scenario.detector.layout(grid)?;
    let t1 = scenario.params.time_to_grating();
    let omega_r = scenario.params.recoil_frequency();
    let drift: Vec<Complex64> = (0..grid.n_points())
        .map(|j| {
            let p = grid.momentum(j);
            Complex64::from_polar(1.0, -p * p * omega_r * t1)
        })
        .collect();
    let mut acc = FringeAccumulator::new(layout.centers.len());
    let mut buffer = alloc::vec![Complex64::new(0.0, 0.0); grid.n_points()];
    let summary = for_each_member(&psi0, &scenario.emission, |_, _, raw, member| {
        for ((b, c), f) in buffer.iter_mut().zip(member.amplitudes()).zip(&drift) {
            *b = c * f;
        }
        acc.add(raw, &buffer, &pairing, &layout);
    })?;
    if summary.members == 0 {
        return Err(Error::Empty("emission ensemble"));
    }
    let counts = acc.counts(&scenario.phases, scenario.detector.atoms_per_run * grid.spacing());
    let mut metadata = scenario.metadata();
    metadata.mean_distance = d;
    metadata.alpha = summary.alpha;
    metadata.dropped_weight = summary.dropped_weight;
    metadata.members = summary.members;
    Ok(FringeSeries { phases: scenario.phases.clone(), bin_centers: layout.centers, counts, metadata })
}

/// [`run_sequence_at`] for the scenario's own packet at distance `d`.
pub fn run_sequence(scenario: &Scenario, d: f64) -> Result<FringeSeries> {
    run_sequence_at(scenario, d, 0.0)
}

/// Total probability after each stage of one explicit (non-streamed) pass at
/// phase `phase`: initial packet, emitted ensemble, first drift, grating,
/// second drift, and the detected fraction.
pub fn stage_totals(scenario: &Scenario, d: f64, phase: f64) -> Result<[(&'static str, f64); 6]> {
    scenario.validate()?;
    let p = &scenario.params;
    let psi0 = build_wavepacket(&scenario.packet.with_distance(d), &scenario.grid)?;
    let emitted = emission::emit_mixture(&psi0, &scenario.emission, p)?;
    let drifted = propagate_mixture(&emitted, p.time_to_grating(), p.mass)?;
    let split = bragg_split(&drifted, &scenario.splitter.with_phase(phase), p)?;
    let arrived = propagate_mixture(&split, p.time_grating_to_detector(), p.mass)?;
    let hist = detect(&arrived, &scenario.detector)?;
    Ok([
        ("initial", psi0.norm_sqr()),
        ("emission", emitted.trace()),
        ("drift to grating", drifted.trace()),
        ("grating", split.trace()),
        ("drift to detector", arrived.trace()),
        ("detector", hist.counts.iter().sum::<f64>() / scenario.detector.atoms_per_run),
    ])
}

/// Same pass as [`run_sequence`] but built stage by stage on the full
/// mixture; slower, used to cross-check the streamed version.
pub fn run_sequence_explicit(scenario: &Scenario, d: f64) -> Result<FringeSeries> {
    scenario.validate()?;
    let p = &scenario.params;
    let psi0 = build_wavepacket(&scenario.packet.with_distance(d), &scenario.grid)?;
    let emitted = emission::emit_mixture(&psi0, &scenario.emission, p)?;
    let drifted = propagate_mixture(&emitted, p.time_to_grating(), p.mass)?;
    let mut counts = Vec::with_capacity(scenario.phases.len());
    let mut centers = Vec::new();
    for &phi in &scenario.phases {
        let split = bragg_split(&drifted, &scenario.splitter.with_phase(phi), p)?;
        let arrived = propagate_mixture(&split, p.time_grating_to_detector(), p.mass)?;
        let hist = detect(&arrived, &scenario.detector)?;
        centers = hist.centers;
        counts.push(hist.counts);
    }
    let mut metadata = scenario.metadata();
    metadata.mean_distance = d;
    metadata.alpha = emitted.alpha();
    metadata.dropped_weight = emitted.dropped_weight();
    metadata.members = emitted.len();
    Ok(FringeSeries { phases: scenario.phases.clone(), bin_centers: centers, counts, metadata })
}

/// One atom start condition of the beam average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSample {
    pub distance: f64,
    pub center_momentum: f64,
    pub weight: f64,
}

/// The start conditions that survive the mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPlan {
    pub samples: Vec<BeamSample>,
    /// Weight fraction dropped because the atom (or a tail of its packet
    /// above `1e-6`) would start inside the mirror.
    pub shadowed_fraction: f64,
}

/// Stratified midpoints across `[d̄ - w/2, d̄ + w/2]` times the momentum
/// classes. With `w = 0` the plan is the single start condition `d̄`.
pub fn plan_beam_average(scenario: &Scenario) -> Result<BeamPlan> {
    scenario.validate()?;
    let p = &scenario.params;
    let classes: Vec<(f64, f64)> = if scenario.averaging.momentum_classes.is_empty() {
        alloc::vec![(0.0, 1.0)]
    } else {
        scenario.averaging.momentum_classes.clone()
    };
    let class_total: f64 = classes.iter().map(|c| c.1).sum();
    if p.beam_width == 0.0 {
        let samples = classes
            .iter()
            .map(|&(offset, w)| BeamSample { distance: p.mean_distance, center_momentum: offset, weight: w / class_total })
            .collect();
        return Ok(BeamPlan { samples, shadowed_fraction: 0.0 });
    }
    let n = scenario.averaging.samples;
    let lo = p.mean_distance - p.beam_width / 2.0;
    let mut samples = Vec::new();
    let mut shadowed = 0.0;
    for i in 0..n {
        let d = lo + (i as f64 + 0.5) * p.beam_width / n as f64;
        for &(offset, w) in &classes {
            let weight = w / (class_total * n as f64);
            if weight == 0.0 {
                continue;
            }
            let inside = d < 0.0 || {
                let spec = WavepacketSpec {
                    distance: d,
                    center_momentum: scenario.packet.center_momentum + offset,
                    ..scenario.packet.clone()
                };
                build_wavepacket(&spec, &scenario.grid)?.probability_behind_mirror()
                    >= emission::BEHIND_MIRROR_TOLERANCE
            };
            if inside {
                shadowed += weight;
            } else {
                samples.push(BeamSample { distance: d, center_momentum: offset, weight });
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::FullyShadowed);
    }
    if shadowed > 0.0 {
        log::info!("beam average at d = {:.3e} m: shadow fraction {shadowed:.4}", p.mean_distance);
    }
    Ok(BeamPlan { samples, shadowed_fraction: shadowed })
}

/// Runs one planned start condition.
pub fn run_beam_sample(scenario: &Scenario, sample: &BeamSample) -> Result<FringeSeries> {
    run_sequence_at(scenario, sample.distance, sample.center_momentum)
}

/// Weighted average of the per-sample series of `plan`, in plan order.
pub fn combine_beam_average(scenario: &Scenario, plan: &BeamPlan, runs: &[FringeSeries]) -> Result<FringeSeries> {
    if runs.is_empty() || runs.len() != plan.samples.len() {
        return Err(Error::Empty("beam average runs"));
    }
    let total: f64 = plan.samples.iter().map(|s| s.weight).sum();
    let mut counts = alloc::vec![alloc::vec![0.0; runs[0].bin_centers.len()]; runs[0].phases.len()];
    let (mut alpha, mut dropped, mut members) = (0.0, 0.0, 0);
    for (run, sample) in runs.iter().zip(&plan.samples) {
        if run.bin_centers != runs[0].bin_centers || run.phases != runs[0].phases {
            return Err(Error::GridMismatch);
        }
        let w = sample.weight / total;
        for (acc_row, row) in counts.iter_mut().zip(&run.counts) {
            for (a, c) in acc_row.iter_mut().zip(row) {
                *a += w * c;
            }
        }
        alpha += w * run.metadata.alpha;
        dropped += w * run.metadata.dropped_weight;
        members = members.max(run.metadata.members);
    }
    let mut metadata = scenario.metadata();
    metadata.samples_used = runs.len();
    metadata.shadowed_fraction = plan.shadowed_fraction;
    metadata.alpha = alpha;
    metadata.dropped_weight = dropped;
    metadata.members = members;
    Ok(FringeSeries { phases: runs[0].phases.clone(), bin_centers: runs[0].bin_centers.clone(), counts, metadata })
}

/// Fringes averaged over the transverse extent of the beam.
pub fn beam_average(scenario: &Scenario) -> Result<FringeSeries> {
    let plan = plan_beam_average(scenario)?;
    if scenario.params.beam_width == 0.0 && plan.samples.len() == 1 {
        let s = plan.samples[0];
        return run_sequence_at(scenario, s.distance, s.center_momentum);
    }
    let runs = plan.samples.iter().map(|s| run_beam_sample(scenario, s)).collect::<Result<Vec<_>>>()?;
    combine_beam_average(scenario, &plan, &runs)
}

/// Members and weights of a two-port test state: `|p1⟩` and `|p2⟩` packets
/// mixed with weights `w` and `1 - w`.
#[doc(hidden)]
pub fn two_packet_mixture(a: Wavepacket, b: Wavepacket, w: f64) -> Result<MixedState> {
    MixedState::from_members(alloc::vec![
        Member { branch: emission::Branch::Pure, u: 0.0, weight: w, state: a },
        Member { branch: emission::Branch::Pure, u: 0.0, weight: 1.0 - w, state: b },
    ])
}
