//! The subcommands: each runs one part of the pipeline and writes CSV (and
//! optionally SVG) files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mirrorwave_core::analysis::{
    check_increasing, deconvolve, fit_fringe, fit_outer_bins, fwhm, momentum_resolved_visibility, phase_coverage,
    semiclassical_point, CurveModel, FitResult, VisibilityCurve, VisibilityPoint,
};
use mirrorwave_core::emission::emit_mixture;
use mirrorwave_core::interferometer::{
    combine_beam_average, plan_beam_average, run_beam_sample, run_sequence_at, FringeSeries, Scenario,
};
use mirrorwave_core::wavepacket::{build_wavepacket, density_moments, momentum_density};
use mirrorwave_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::{num, read_table, OutputDir};
use crate::plot::{Plot, Series};

pub const FRINGE_COLUMNS: [&str; 3] = ["phi_B_rad", "bin_center_hbar_k0", "counts"];
pub const VISIBILITY_COLUMNS: [&str; 5] = ["d_mean_m", "V", "CI95_lo", "CI95_hi", "model"];
pub const EMIT_COLUMNS: [&str; 4] = ["p_hbar_k0", "pre", "post", "kernel"];
pub const FIT_COLUMNS: [&str; 18] = [
    "bin_center_hbar_k0",
    "fitted",
    "N0",
    "NA",
    "phi0_rad",
    "V",
    "sigma_V",
    "CI95_lo",
    "CI95_hi",
    "coef_const",
    "coef_cos",
    "coef_sin",
    "cov_const_const",
    "cov_cos_cos",
    "cov_sin_sin",
    "cov_cos_sin",
    "rss",
    "n_points",
];
pub const MOMENTUM_COLUMNS: [&str; 7] =
    ["bin_center_hbar_k0", "V", "CI95_lo", "CI95_hi", "N0", "fitted", "bragg_acceptance"];

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: ScenarioConfig,
    pub out: PathBuf,
    pub plot: bool,
}

impl RunContext {
    fn output(&self) -> Result<OutputDir, CliError> {
        OutputDir::create(&self.out, &self.config.hash())
    }
}

/// Beam average with the start conditions run on the worker pool; the
/// reduction runs in plan order, so the result does not depend on the
/// number of threads.
pub fn beam_average_parallel(scenario: &Scenario) -> Result<FringeSeries, Error> {
    let plan = plan_beam_average(scenario)?;
    if scenario.params.beam_width == 0.0 && plan.samples.len() == 1 {
        let s = plan.samples[0];
        return run_sequence_at(scenario, s.distance, s.center_momentum);
    }
    let runs = plan.samples.par_iter().map(|s| run_beam_sample(scenario, s)).collect::<Result<Vec<_>, _>>()?;
    combine_beam_average(scenario, &plan, &runs)
}

/// Replaces every count by a Poisson draw with that mean.
pub fn apply_shot_noise(series: &mut FringeSeries, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in &mut series.counts {
        for c in row.iter_mut() {
            *c = if *c > 0.0 { Poisson::new(*c).expect("positive mean").sample(&mut rng) } else { 0.0 };
        }
    }
    series.metadata.seed = Some(seed);
}

fn simulate(ctx: &RunContext, scenario: &Scenario, seed_offset: u64) -> Result<FringeSeries, CliError> {
    let mut series = beam_average_parallel(scenario)?;
    if ctx.config.shot_noise {
        apply_shot_noise(&mut series, ctx.config.seed.wrapping_add(seed_offset));
    }
    Ok(series)
}

fn check_phases(phases: &[f64]) -> Result<(), CliError> {
    let (distinct, span) = phase_coverage(phases);
    if distinct < 4 || span < std::f64::consts::PI - 1e-12 {
        return Err(Error::InsufficientPhases { distinct, span }.into());
    }
    Ok(())
}

fn series_metadata(series: &FringeSeries) -> Vec<(&'static str, String)> {
    let m = &series.metadata;
    vec![
        ("d_mean_m", num(m.mean_distance)),
        ("beam_width_m", num(m.params.beam_width)),
        ("samples_used", m.samples_used.to_string()),
        ("shadowed_fraction", num(m.shadowed_fraction)),
        ("alpha", num(m.alpha)),
        ("dropped_weight", num(m.dropped_weight)),
        ("members", m.members.to_string()),
        ("time_to_grating_s", num(m.time_to_grating)),
        ("time_to_detector_s", num(m.time_to_detector)),
        ("seed", m.seed.map_or_else(|| "none".into(), |s| s.to_string())),
    ]
}

fn fit_row(center: f64, fit: Option<&FitResult>) -> Vec<String> {
    let mut row = vec![num(center)];
    match fit {
        None => {
            row.push("0".into());
            row.extend(std::iter::repeat(String::new()).take(FIT_COLUMNS.len() - 2));
        }
        Some(f) => {
            row.push("1".into());
            let c = &f.covariance;
            row.extend(
                [
                    f.n0,
                    f.na,
                    f.phi0,
                    f.visibility,
                    f.sigma_v,
                    f.ci95.0,
                    f.ci95.1,
                    f.coefficients[0],
                    f.coefficients[1],
                    f.coefficients[2],
                    c[0][0],
                    c[1][1],
                    c[2][2],
                    c[1][2],
                    f.rss,
                ]
                .map(num),
            );
            row.push(f.n_points.to_string());
        }
    }
    row
}

fn fringe_rows(series: &FringeSeries) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(series.phases.len() * series.bin_centers.len());
    for (phi, counts) in series.phases.iter().zip(&series.counts) {
        for (center, c) in series.bin_centers.iter().zip(counts) {
            rows.push(vec![num(*phi), num(*center), num(*c)]);
        }
    }
    rows
}

/// Pre- and post-emission densities and the deconvolved recoil kernel.
pub fn emit_pattern(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let s = ctx.config.scenario()?;
    let psi0 = build_wavepacket(&s.packet, &s.grid)?;
    let mixture = emit_mixture(&psi0, &s.emission, &s.params)?;
    let pre = psi0.density();
    let post = momentum_density(&mixture);
    let dp = s.grid.spacing();
    let kernel = deconvolve(&post, &pre, dp, None)?;
    let (_, rms_pre) = density_moments(&s.grid, &pre);
    let (_, rms_post) = density_moments(&s.grid, &post);
    let added = (rms_post * rms_post - rms_pre * rms_pre).max(0.0).sqrt();
    let momenta = s.grid.momenta();
    let rows: Vec<Vec<String>> = (0..momenta.len())
        .map(|j| vec![num(momenta[j]), num(pre[j]), num(post[j]), num(kernel[j])])
        .collect();
    let meta = [
        ("d_mean_m", num(s.params.mean_distance)),
        ("grid_spacing_hbar_k0", num(dp)),
        ("alpha", num(mixture.alpha())),
        ("members", mixture.len().to_string()),
        ("rms_recoil_hbar_k0", num(added)),
    ];
    let out = ctx.output()?;
    let mut files = vec![out.write_csv("emit_pattern.csv", &meta, &EMIT_COLUMNS, &rows)?];
    println!(
        "emit-pattern: norm pre {:.12} post {:.12}, added rms recoil {added:.5} hbar*k0, {} members",
        pre.iter().sum::<f64>() * dp,
        post.iter().sum::<f64>() * dp,
        mixture.len()
    );
    if ctx.plot {
        let window = |y: &[f64]| -> Vec<(f64, f64)> {
            momenta.iter().zip(y).filter(|(p, _)| p.abs() <= 3.0).map(|(&p, &v)| (p, v)).collect()
        };
        let plot = Plot {
            title: "Momentum distribution before and after emission".into(),
            x_label: "p [hbar k0]".into(),
            y_label: "density".into(),
            series: vec![
                Series::line("pre", window(&pre)),
                Series::line("post", window(&post)),
                Series::line("kernel", window(&kernel)),
            ],
        };
        files.push(out.write_text("emit_pattern.svg", &plot.to_svg())?);
    }
    Ok(files)
}

/// Beam-averaged fringes at the configured mean distance and the fit of
/// every bin.
pub fn fringe(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let s = ctx.config.scenario()?;
    check_phases(&s.phases)?;
    let series = simulate(ctx, &s, 0)?;
    let weighting = ctx.config.weighting();
    let bins = momentum_resolved_visibility(&series, &s.splitter, &s.params, ctx.config.fit.count_floor, weighting)?;
    let outer = fit_outer_bins(&series, &s.splitter, weighting)?;
    let out = ctx.output()?;
    let meta = series_metadata(&series);
    let mut files = vec![out.write_csv("fringe.csv", &meta, &FRINGE_COLUMNS, &fringe_rows(&series))?];
    let fit_rows: Vec<Vec<String>> = bins.iter().map(|b| fit_row(b.center, b.fit.as_ref())).collect();
    files.push(out.write_csv("fits.csv", &meta, &FIT_COLUMNS, &fit_rows)?);
    let half = s.splitter.transfer(s.params.k0()) / 2.0;
    let summary_rows: Vec<Vec<String>> = [("plus", half, &outer.plus), ("minus", -half, &outer.minus)]
        .iter()
        .map(|(port, p, f)| {
            let c = series.bin_centers[series.nearest_bin(*p)];
            vec![port.to_string(), num(c), num(f.visibility), num(f.ci95.0), num(f.ci95.1), num(f.phi0)]
        })
        .collect();
    files.push(out.write_csv(
        "fringe_summary.csv",
        &meta,
        &["port", "bin_center_hbar_k0", "V", "CI95_lo", "CI95_hi", "phi0_rad"],
        &summary_rows,
    )?);
    let max_v = bins.iter().filter_map(|b| b.fit.map(|f| f.visibility)).fold(0.0, f64::max);
    println!(
        "fringe: d = {:e} m, V(+) = {:.5}, V(-) = {:.5}, phase difference {:.4} rad, max V over bins {max_v:.5}, shadowed {:.4}",
        s.params.mean_distance,
        outer.plus.visibility,
        outer.minus.visibility,
        outer.plus.phi0 - outer.minus.phi0,
        series.metadata.shadowed_fraction
    );
    if ctx.plot {
        let port = |p: f64| {
            let b = series.nearest_bin(p);
            series.phases.iter().zip(series.bin_series(b)).map(|(&x, y)| (x, y)).collect()
        };
        let plot = Plot {
            title: format!("Outer ports at d = {:.2} um", s.params.mean_distance * 1e6),
            x_label: "phi_B [rad]".into(),
            y_label: "counts".into(),
            series: vec![Series::markers("+hbar kB", port(half)), Series::markers("-hbar kB", port(-half))],
        };
        files.push(out.write_text("fringe.svg", &plot.to_svg())?);
    }
    Ok(files)
}

/// Quantum and semiclassical visibility against mean distance.
pub fn scan_distance(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let base = ctx.config.scenario()?;
    check_phases(&base.phases)?;
    let distances = &ctx.config.distances_m;
    if distances.is_empty() {
        return Err(Error::Empty("distance list").into());
    }
    if let Some(&d) = distances.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter { name: "distances_m", reason: format!("must be finite and >= 0, got {d}") }.into());
    }
    check_increasing(distances.iter().copied())?;
    for &d in distances {
        base.with_mean_distance(d).validate()?;
    }
    let weighting = ctx.config.weighting();
    let points = distances
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let s = base.with_mean_distance(d);
            let series = simulate(ctx, &s, i as u64)?;
            let fit = *fit_outer_bins(&series, &s.splitter, weighting)?.best();
            let quantum = VisibilityPoint { distance: d, visibility: fit.visibility, ci95: fit.ci95 };
            Ok((quantum, semiclassical_point(&s, d)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let (quantum, semi): (Vec<_>, Vec<_>) = points.into_iter().unzip();
    let curves = [VisibilityCurve::new(CurveModel::Quantum, quantum)?, VisibilityCurve::new(CurveModel::Semiclassical, semi)?];
    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![num(p.distance), num(p.visibility), num(p.ci95.0), num(p.ci95.1), c.model.as_str().to_string()]
            })
        })
        .collect();
    let half = |c: &VisibilityCurve| c.half_visibility_distance().map_or_else(|| "none".into(), num);
    let meta = [
        ("beam_width_m", num(base.params.beam_width)),
        ("half_visibility_quantum_m", half(&curves[0])),
        ("half_visibility_semiclassical_m", half(&curves[1])),
    ];
    let out = ctx.output()?;
    let mut files = vec![out.write_csv("visibility.csv", &meta, &VISIBILITY_COLUMNS, &rows)?];
    println!(
        "scan-distance: {} points, half-visibility distance quantum {} m, semiclassical {} m",
        distances.len(),
        meta[1].1,
        meta[2].1
    );
    if ctx.plot {
        let pts = |c: &VisibilityCurve| c.points.iter().map(|p| (p.distance * 1e6, p.visibility)).collect();
        let plot = Plot {
            title: "Visibility against mean distance".into(),
            x_label: "d [um]".into(),
            y_label: "V".into(),
            series: vec![Series::line("quantum", pts(&curves[0])), Series::line("semiclassical", pts(&curves[1]))],
        };
        files.push(out.write_text("visibility.svg", &plot.to_svg())?);
    }
    Ok(files)
}

/// Visibility of every detector bin with the grating acceptance.
pub fn momentum_visibility(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    let s = ctx.config.scenario()?;
    check_phases(&s.phases)?;
    let series = simulate(ctx, &s, 0)?;
    let bins =
        momentum_resolved_visibility(&series, &s.splitter, &s.params, ctx.config.fit.count_floor, ctx.config.weighting())?;
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|b| match &b.fit {
            Some(f) => vec![
                num(b.center),
                num(f.visibility),
                num(f.ci95.0),
                num(f.ci95.1),
                num(f.n0),
                "1".into(),
                num(b.acceptance),
            ],
            None => vec![num(b.center), String::new(), String::new(), String::new(), String::new(), "0".into(), num(b.acceptance)],
        })
        .collect();
    let acceptance_fwhm = s.splitter.acceptance_fwhm(&s.params);
    let peak = bins
        .iter()
        .filter_map(|b| b.fit.map(|f| (b.center, f.visibility)))
        .fold((f64::NAN, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let side: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.center * peak.0 > 0.0)
        .map(|b| (b.center, b.fit.map_or(0.0, |f| f.visibility)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = side.into_iter().unzip();
    let v_fwhm = fwhm(&x, &y);
    let mut meta = series_metadata(&series);
    meta.push(("argmax_bin_hbar_k0", num(peak.0)));
    meta.push(("visibility_fwhm_hbar_k0", v_fwhm.map_or_else(|| "none".into(), num)));
    meta.push(("acceptance_fwhm_hbar_k0", num(acceptance_fwhm)));
    let out = ctx.output()?;
    let mut files = vec![out.write_csv("momentum_visibility.csv", &meta, &MOMENTUM_COLUMNS, &rows)?];
    println!(
        "momentum-visibility: peak V = {:.5} at {} hbar*k0, FWHM of V(p) {} vs acceptance FWHM {:.4}",
        peak.1,
        peak.0,
        meta[meta.len() - 2].1,
        acceptance_fwhm
    );
    if ctx.plot {
        let window = |f: &dyn Fn(&mirrorwave_core::analysis::BinVisibility) -> Option<f64>| {
            bins.iter().filter(|b| b.center.abs() <= 2.5).filter_map(|b| f(b).map(|v| (b.center, v))).collect()
        };
        let vmax = peak.1.max(1e-300);
        let plot = Plot {
            title: "Momentum-resolved visibility".into(),
            x_label: "p [hbar k0]".into(),
            y_label: "V / max V, |r|^2".into(),
            series: vec![
                Series::markers("V / max V", window(&|b| b.fit.map(|f| f.visibility / vmax))),
                Series::line("Bragg acceptance", window(&|b| Some(b.acceptance))),
            ],
        };
        files.push(out.write_text("momentum_visibility.svg", &plot.to_svg())?);
    }
    Ok(files)
}

/// Fits every bin of a fringe CSV file.
pub fn fit_file(ctx: &RunContext, input: &Path) -> Result<Vec<PathBuf>, CliError> {
    let table = read_table(input, &FRINGE_COLUMNS)?;
    if table.rows.is_empty() {
        return Err(CliError::Schema(format!("{}: no data rows", input.display())));
    }
    let mut bins: BTreeMap<i64, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, row) in table.rows.iter().enumerate() {
        if row.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Schema(format!("{}: row {} has an empty or non-finite value", input.display(), i + 1)));
        }
        // key on the bin centre at a resolution far below any bin width
        let key = (row[1] * 1e9).round() as i64;
        let entry = bins.entry(key).or_insert_with(|| (row[1], Vec::new(), Vec::new()));
        entry.1.push(row[0]);
        entry.2.push(row[2]);
    }
    let weighting = ctx.config.weighting();
    let floor = ctx.config.fit.count_floor;
    let mut rows = Vec::with_capacity(bins.len());
    for (center, phases, counts) in bins.values() {
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let fit = if mean < floor { None } else { Some(fit_fringe(phases, counts, weighting)?) };
        rows.push(fit_row(*center, fit.as_ref()));
    }
    let bytes = std::fs::read(input).map_err(|e| CliError::Schema(e.to_string()))?;
    let meta = [
        ("input", input.display().to_string()),
        ("input_sha256", hex::encode(Sha256::digest(&bytes))),
    ];
    let out = ctx.output()?;
    let file = out.write_csv("fits.csv", &meta, &FIT_COLUMNS, &rows)?;
    println!("fit: {} bins from {}", rows.len(), input.display());
    Ok(vec![file])
}
