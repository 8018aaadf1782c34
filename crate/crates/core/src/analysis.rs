//! Fringe fitting, visibility curves and momentum-space deconvolution.
//!
//! Fringes are fitted to `N(φ) = N0 + NA cos(φ + φ0)`, which is linear in
//! the basis `{1, cos φ, sin φ}`: with `N = c + a cos φ + b sin φ` one has
//! `N0 = c`, `NA = hypot(a, b)` and `φ0 = atan2(-b, a)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::{Euclid, Float};

use crate::emission::{semiclassical_visibility, SemiclassicalConfig};
use crate::fft::FftPlan;
use crate::grid::MomentumGrid;
use crate::interferometer::{beam_average, bragg_amplitudes, BraggSplitter, Detector, FringeSeries, Histogram, Scenario};
use crate::params::ExperimentParams;
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Noise model of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Ordinary least squares; the noise level is estimated from the
    /// residuals.
    #[default]
    None,
    /// Weights `1 / max(N, 1)` with the variance taken as known.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub n0: f64,
    pub na: f64,
    /// Phase offset in `(-π, π]`.
    pub phi0: f64,
    pub visibility: f64,
    /// Raw coefficients `(c, a, b)` of the linear model.
    pub coefficients: [f64; 3],
    /// Covariance of `(c, a, b)`.
    pub covariance: [[f64; 3]; 3],
    /// First-order standard error of `V`.
    pub sigma_v: f64,
    /// 95% interval of `V`, lower end clipped at zero.
    pub ci95: (f64, f64),
    /// Residual sum of squares (weighted when Poisson weights are used).
    pub rss: f64,
    pub n_points: usize,
}

fn wrap_phase(x: f64) -> f64 {
    let y = Euclid::rem_euclid(&x, &(2.0 * PI));
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Number of distinct phases (mod 2π) and the arc they span, i.e. 2π minus
/// the largest empty gap on the circle.
pub fn phase_coverage(phases: &[f64]) -> (usize, f64) {
    let mut wrapped: Vec<f64> = phases.iter().map(|p| Euclid::rem_euclid(p, &(2.0 * PI))).collect();
    wrapped.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    for p in wrapped {
        if distinct.last().map_or(true, |&q| p - q > 1e-9) {
            distinct.push(p);
        }
    }
    if distinct.len() > 1 && distinct[0] + 2.0 * PI - distinct[distinct.len() - 1] <= 1e-9 {
        distinct.pop();
    }
    if distinct.len() < 2 {
        return (distinct.len(), 0.0);
    }
    let mut gap = distinct[0] + 2.0 * PI - distinct[distinct.len() - 1];
    for w in distinct.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    (distinct.len(), 2.0 * PI - gap)
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |i: usize, j: usize| {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
        m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let scale = m[0][0] * m[1][1] * m[2][2];
    if !(det.abs() > 1e-12 * scale.abs()) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = c(j, i) / det;
        }
    }
    Some(inv)
}

/// Least-squares fit of one bin's counts against phase.
pub fn fit_fringe(phases: &[f64], counts: &[f64], weighting: Weighting) -> Result<FitResult> {
    if phases.len() != counts.len() {
        return Err(Error::InvalidParameter {
            name: "counts",
            reason: format!("{} phases but {} counts", phases.len(), counts.len()),
        });
    }
    if phases.iter().chain(counts).any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter { name: "counts", reason: "phases and counts must be finite".into() });
    }
    let (distinct, span) = phase_coverage(phases);
    if distinct < 4 || span < PI - 1e-9 {
        return Err(Error::InsufficientPhases { distinct, span });
    }
    let weights: Vec<f64> = match weighting {
        Weighting::None => alloc::vec![1.0; counts.len()],
        Weighting::Poisson => counts.iter().map(|&y| 1.0 / y.max(1.0)).collect(),
    };
    let basis = |phi: f64| [1.0, phi.cos(), phi.sin()];
    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for ((&phi, &y), &w) in phases.iter().zip(counts).zip(&weights) {
        let a = basis(phi);
        for i in 0..3 {
            rhs[i] += w * a[i] * y;
            for j in 0..3 {
                normal[i][j] += w * a[i] * a[j];
            }
        }
    }
    let inv = invert3(&normal).ok_or(Error::DegenerateDesign)?;
    let mut coef = [0.0; 3];
    for i in 0..3 {
        coef[i] = (0..3).map(|j| inv[i][j] * rhs[j]).sum();
    }
    let rss: f64 = phases
        .iter()
        .zip(counts)
        .zip(&weights)
        .map(|((&phi, &y), &w)| {
            let a = basis(phi);
            let r = y - (coef[0] * a[0] + coef[1] * a[1] + coef[2] * a[2]);
            w * r * r
        })
        .sum();
    let n = counts.len();
    let noise = match weighting {
        Weighting::None => rss / (n - 3) as f64,
        Weighting::Poisson => 1.0,
    };
    let covariance = inv.map(|row| row.map(|x| x * noise));
    let [c, a, b] = coef;
    if !(c > 0.0) {
        return Err(Error::NonPositiveMean { n0: c });
    }
    let na = a.hypot(b);
    let v = na / c;
    let sigma_v = if na > 0.0 {
        let g = [-v / c, a / (na * c), b / (na * c)];
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += g[i] * covariance[i][j] * g[j];
            }
        }
        var.max(0.0).sqrt()
    } else {
        (0.5 * (covariance[1][1] + covariance[2][2])).max(0.0).sqrt() / c
    };
    Ok(FitResult {
        n0: c,
        na,
        phi0: wrap_phase((-b).atan2(a)),
        visibility: v,
        coefficients: coef,
        covariance,
        sigma_v,
        ci95: ((v - Z95 * sigma_v).max(0.0), v + Z95 * sigma_v),
        rss,
        n_points: n,
    })
}

/// Full width at half maximum of the peak at the global maximum of `y`,
/// with linear interpolation between samples. `None` if the curve does not
/// fall below half on both sides.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let (peak, &max) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(max > 0.0) {
        return None;
    }
    let half = max / 2.0;
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (0..peak).rev().find(|&i| y[i] <= half).map(|i| cross(i, i + 1))?;
    let right = (peak + 1..y.len()).find(|&i| y[i] <= half).map(|i| cross(i - 1, i))?;
    Some(right - left)
}

/// Fringe fit of one detector bin, or `None` when its mean count is below
/// the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct BinVisibility {
    pub center: f64,
    pub fit: Option<FitResult>,
    /// Model grating reflectivity `|r(p)|²` at the bin centre.
    pub acceptance: f64,
}

/// Visibility of every bin plus the grating acceptance on the same bins.
pub fn momentum_resolved_visibility(
    series: &FringeSeries,
    splitter: &BraggSplitter,
    params: &ExperimentParams,
    count_floor: f64,
    weighting: Weighting,
) -> Result<Vec<BinVisibility>> {
    (0..series.bin_centers.len())
        .map(|b| {
            let counts = series.bin_series(b);
            let mean = counts.iter().sum::<f64>() / counts.len() as f64;
            let fit = if mean < count_floor { None } else { Some(fit_fringe(&series.phases, &counts, weighting)?) };
            let center = series.bin_centers[b];
            Ok(BinVisibility { center, fit, acceptance: bragg_amplitudes(center, splitter, params).1.norm_sqr() })
        })
        .collect()
}

/// Fits of the two bins at `±ħkB`, where the grating recombines the
/// outermost recoil components, and the better of the two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterFit {
    pub plus: FitResult,
    pub minus: FitResult,
}

impl OuterFit {
    /// The reported visibility: the larger of the two ports.
    pub fn best(&self) -> &FitResult {
        if self.plus.visibility >= self.minus.visibility {
            &self.plus
        } else {
            &self.minus
        }
    }
}

pub fn fit_outer_bins(series: &FringeSeries, splitter: &BraggSplitter, weighting: Weighting) -> Result<OuterFit> {
    let half = splitter.transfer(series.metadata.params.k0()) / 2.0;
    let fit = |p: f64| fit_fringe(&series.phases, &series.bin_series(series.nearest_bin(p)), weighting);
    Ok(OuterFit { plus: fit(half)?, minus: fit(-half)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveModel {
    Quantum,
    Semiclassical,
    MeasuredImport,
}

impl CurveModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveModel::Quantum => "quantum",
            CurveModel::Semiclassical => "semiclassical",
            CurveModel::MeasuredImport => "measured-import",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityPoint {
    pub distance: f64,
    pub visibility: f64,
    pub ci95: (f64, f64),
}

/// Visibility against mean mirror distance for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCurve {
    pub model: CurveModel,
    pub points: Vec<VisibilityPoint>,
}

impl VisibilityCurve {
    pub fn new(model: CurveModel, points: Vec<VisibilityPoint>) -> Result<Self> {
        check_increasing(points.iter().map(|p| p.distance))?;
        Ok(Self { model, points })
    }

    /// First distance beyond the maximum at which the curve has fallen to
    /// half of its maximum, interpolated linearly.
    pub fn half_visibility_distance(&self) -> Option<f64> {
        let (peak, max) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.visibility))
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        let half = max / 2.0;
        let i = (peak + 1..self.points.len()).find(|&i| self.points[i].visibility <= half)?;
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        Some(a.distance + (half - a.visibility) * (b.distance - a.distance) / (b.visibility - a.visibility))
    }
}

pub fn check_increasing(values: impl Iterator<Item = f64>) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for d in values {
        if !(d > last) || !d.is_finite() {
            return Err(Error::InvalidParameter {
                name: "distances",
                reason: "mean distances must be finite and strictly increasing".into(),
            });
        }
        last = d;
    }
    Ok(())
}

/// Semiclassical visibility at `d̄` for the scenario's beam and bin width.
pub fn semiclassical_point(scenario: &Scenario, mean_distance: f64) -> Result<VisibilityPoint> {
    let sc = SemiclassicalConfig::from_params(&scenario.params);
    let du = scenario.detector.bin_width.min(1.0);
    let v = semiclassical_visibility(mean_distance, &sc, du, scenario.params.beam_width)?;
    Ok(VisibilityPoint { distance: mean_distance, visibility: v, ci95: (v, v) })
}

/// Quantum (beam-averaged fringe fit on the outer bins) and semiclassical
/// curves on the same distances.
pub fn visibility_vs_distance(
    scenario: &Scenario,
    distances: &[f64],
    weighting: Weighting,
) -> Result<(VisibilityCurve, VisibilityCurve)> {
    check_increasing(distances.iter().copied())?;
    let mut quantum = Vec::with_capacity(distances.len());
    let mut semi = Vec::with_capacity(distances.len());
    for &d in distances {
        if d < 0.0 {
            return Err(Error::InvalidParameter { name: "mean_distance", reason: format!("must be >= 0, got {d}") });
        }
        let s = scenario.with_mean_distance(d);
        let series = beam_average(&s)?;
        let fit = *fit_outer_bins(&series, &s.splitter, weighting)?.best();
        quantum.push(VisibilityPoint { distance: d, visibility: fit.visibility, ci95: fit.ci95 });
        semi.push(semiclassical_point(&s, d)?);
    }
    Ok((VisibilityCurve::new(CurveModel::Quantum, quantum)?, VisibilityCurve::new(CurveModel::Semiclassical, semi)?))
}

/// Counts of a density sampled on the grid, binned like the detector.
pub fn bin_density(grid: &MomentumGrid, density: &[f64], det: &Detector) -> Result<Histogram> {
    if density.len() != grid.n_points() {
        return Err(Error::GridMismatch);
    }
    let layout = det.layout(grid)?;
    let mut counts = alloc::vec![0.0; layout.centers.len()];
    for (j, rho) in density.iter().enumerate() {
        layout.deposit(&mut counts, j, rho * grid.spacing() * det.atoms_per_run);
    }
    Ok(Histogram { centers: layout.centers, counts })
}

fn centred_spectrum(plan: &FftPlan, x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut data: Vec<Complex64> = (0..n).map(|i| Complex64::new(x[(i + n / 2) % n], 0.0)).collect();
    plan.forward(&mut data);
    data
}

fn centred_inverse(plan: &FftPlan, mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    plan.inverse(&mut spectrum);
    (0..n).map(|i| spectrum[(i + n - n / 2) % n].re / n as f64).collect()
}

/// Circular convolution `(a ⊛ b)(p) = Σ a(p - p') b(p') Δp` of two densities
/// sampled on the same centred grid.
pub fn convolve(a: &[f64], b: &[f64], spacing: f64) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::GridMismatch);
    }
    let plan = FftPlan::new(a.len());
    let (fa, fb) = (centred_spectrum(&plan, a), centred_spectrum(&plan, b));
    let product = fa.iter().zip(&fb).map(|(x, y)| x * y * spacing).collect();
    Ok(centred_inverse(&plan, product))
}

/// Tikhonov-regularised deconvolution: the kernel `K` with
/// `measured ≈ reference ⊛ K`, from `K̂ = M̂ R̂* / (|R̂|² + ε)`.
///
/// `epsilon` defaults to `1e-3 max |R̂|²` (with `R̂` including the `Δp`
/// factor of the convolution). The result is clipped at zero and
/// renormalised to `Σ K Δp = 1`.
pub fn deconvolve(measured: &[f64], reference: &[f64], spacing: f64, epsilon: Option<f64>) -> Result<Vec<f64>> {
    if measured.len() != reference.len() || measured.is_empty() {
        return Err(Error::GridMismatch);
    }
    if let Some(e) = epsilon {
        if !(e > 0.0) {
            return Err(Error::InvalidParameter { name: "epsilon", reason: format!("must be > 0, got {e}") });
        }
    }
    let plan = FftPlan::new(measured.len());
    let m = centred_spectrum(&plan, measured);
    let r: Vec<Complex64> = centred_spectrum(&plan, reference).into_iter().map(|x| x * spacing).collect();
    let eps = epsilon.unwrap_or_else(|| 1e-3 * r.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max));
    let k = m.iter().zip(&r).map(|(mi, ri)| mi * ri.conj() / (ri.norm_sqr() + eps)).collect();
    let mut kernel: Vec<f64> = centred_inverse(&plan, k).into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = kernel.iter().sum::<f64>() * spacing;
    if !(total > 0.0) {
        return Err(Error::Normalization { what: "deconvolved kernel", value: total });
    }
    kernel.iter_mut().for_each(|x| *x /= total);
    Ok(kernel)
}

/// The far-mirror recoil kernel `(3/8)(1 + p²)` on `[-1, 1]`, sampled on the
/// grid (endpoints at half weight) and normalised.
pub fn dipole_recoil_kernel(grid: &MomentumGrid) -> Vec<f64> {
    let mut k: Vec<f64> = grid
        .momenta()
        .iter()
        .map(|&p| {
            let w = 0.375 * (1.0 + p * p);
            if p.abs() < 1.0 - 1e-12 {
                w
            } else if (p.abs() - 1.0).abs() <= 1e-12 {
                0.5 * w
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = k.iter().sum::<f64>() * grid.spacing();
    k.iter_mut().for_each(|x| *x /= total);
    k
}

/// Relative L2 distance `‖a - b‖ / ‖b‖`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
