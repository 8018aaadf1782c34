//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! runtime budget. Runs as a plain binary (`harness = false`).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mirrorwave::commands::{FIT_COLUMNS, MOMENTUM_COLUMNS, VISIBILITY_COLUMNS};
use mirrorwave::output::read_table;
use mirrorwave_core::analysis::{fit_fringe, fit_outer_bins, fwhm, Weighting};
use mirrorwave_core::emission::{
    coherence_vs_distance_pointatom, direction_resolved_visibility, emit_mixture, EmissionConfig,
};
use mirrorwave_core::grid::make_grid;
use mirrorwave_core::interferometer::{beam_average, equispaced_phases, run_sequence, stage_totals, Scenario};
use mirrorwave_core::quadrature::Rule;
use mirrorwave_core::wavepacket::{build_wavepacket, density_moments, momentum_density, PhaseModel, WavepacketSpec};
use mirrorwave_core::ExperimentParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mirrorwave")
}

/// Runs the command line tool and returns its exit code.
fn cli(args: &[&str], config: Option<&str>, dir: &Path) -> i32 {
    let mut cmd = Command::new(bin());
    cmd.args(args).arg("--out").arg(dir);
    if let Some(json) = config {
        let path = dir.with_extension("json");
        std::fs::write(&path, json).expect("write config");
        cmd.arg("--config").arg(path);
    }
    let out = cmd.output().expect("run mirrorwave");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

fn column(columns: &[&str], name: &str) -> usize {
    columns.iter().position(|c| *c == name).expect("known column")
}

fn criterion_1() -> Outcome {
    let rule = Rule::gauss_legendre(64, -1.0, 1.0);
    let integral = rule.integrate(|u| 0.375 * (1.0 + u * u));
    let p = ExperimentParams::default();
    let g = make_grid(4096, 8.0, p.k0()).unwrap();
    let psi = build_wavepacket(&WavepacketSpec::gaussian(0.1, 54e-6), &g).unwrap();
    let cfg = EmissionConfig { n_u: 64, ..EmissionConfig::from_params(&p) };
    let mix = emit_mixture(&psi, &cfg, &p).unwrap();
    let (_, rms0) = density_moments(&g, &psi.density());
    let (_, rms) = density_moments(&g, &momentum_density(&mix));
    let recoil = (rms * rms - rms0 * rms0).sqrt();
    let target = 0.4f64.sqrt();
    // α is the inverse of the summed channel weight, i.e. of the kernel integral
    let channel = 1.0 / mix.alpha();
    let pass = (integral - 1.0).abs() < 0.01 && (channel - 1.0).abs() < 0.01 && (recoil - target).abs() < 0.01 * target;
    outcome(pass, format!("quadrature integral {integral:.6}, emitted channel weight {channel:.5}, rms recoil {recoil:.5} (target {target:.5})"))
}

fn criterion_2(work: &Path) -> Outcome {
    let dir = work.join("c2");
    let code = cli(&["fringe"], Some(r#"{"experiment": {"mean_distance_m": 54e-6}}"#), &dir);
    if code != 0 {
        return outcome(false, format!("fringe exited with {code}"));
    }
    let t = read_table(&dir.join("fits.csv"), &FIT_COLUMNS).unwrap();
    let (fitted, v) = (column(&FIT_COLUMNS, "fitted"), column(&FIT_COLUMNS, "V"));
    let vs: Vec<f64> = t.rows.iter().filter(|r| r[fitted] == 1.0).map(|r| r[v]).collect();
    let max = vs.iter().copied().fold(0.0, f64::max);
    outcome(!vs.is_empty() && max < 0.01, format!("largest V over {} fitted bins {max:.5}", vs.len()))
}

fn criterion_3(work: &Path) -> Outcome {
    let dir = work.join("c3");
    let code = cli(&["fringe"], None, &dir);
    if code != 0 {
        return outcome(false, format!("fringe exited with {code}"));
    }
    let summary = std::fs::read_to_string(dir.join("fringe_summary.csv")).unwrap();
    // rows: port, bin_center_hbar_k0, V, CI95_lo, CI95_hi, phi0_rad
    let flat = summary
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    let base = Scenario::new(ExperimentParams::default()).unwrap();
    let mut hits = Vec::new();
    for beta in (1..=8).map(|i| 2.0 * i as f64) {
        let mut s = base.clone();
        s.packet.phase = PhaseModel::Quadratic { beta };
        let Ok(series) = beam_average(&s) else { continue };
        let v = fit_outer_bins(&series, &s.splitter, Weighting::None).unwrap().best().visibility;
        if (0.048..=0.070).contains(&v) {
            hits.push(format!("beta {beta}: V {v:.4}"));
        }
    }
    let pass = (0.02..=0.30).contains(&flat) && !hits.is_empty();
    outcome(pass, format!("flat phase V {flat:.4}; quadratic sweep in band: [{}]", hits.join(", ")))
}

fn criterion_4() -> Outcome {
    let p = ExperimentParams::default();
    let g = make_grid(4096, 32.0, p.k0()).unwrap();
    let cfg = EmissionConfig::from_params(&p);
    // σp = 8 ħk0 is a point atom on the optical scale (rms size 8 nm)
    let v = |d: f64| {
        let psi = build_wavepacket(&WavepacketSpec::gaussian(8.0, d), &g).unwrap();
        direction_resolved_visibility(&psi, &cfg, 0.125, 64).unwrap()
    };
    let ds: Vec<f64> = (0..=100).map(|i| 5e-6 * i as f64 / 100.0).collect();
    let vs: Vec<f64> = ds.iter().map(|&d| v(d)).collect();
    let worst = ds
        .iter()
        .zip(&vs)
        .map(|(&d, &x)| (x - coherence_vs_distance_pointatom(d, 0.125, &p).unwrap()).abs())
        .fold(0.0, f64::max);
    let Some(i) = (1..vs.len() - 1).find(|&i| vs[i] < vs[i - 1] && vs[i] <= vs[i + 1]) else {
        return outcome(false, format!("no minimum below 5 um, worst deviation {worst:.4}"));
    };
    let (mut a, mut b) = (ds[i - 1], ds[i + 1]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, e) = (b - r * (b - a), a + r * (b - a));
        if v(c) < v(e) {
            b = e;
        } else {
            a = c;
        }
    }
    let zero = 0.5 * (a + b);
    let pass = worst < 0.05 && (zero - 3.18e-6).abs() <= 0.15e-6;
    outcome(pass, format!("max |V - |sinc|| {worst:.4} on [0, 5 um], first zero {:.3} um", zero * 1e6))
}

fn criterion_5(work: &Path) -> Outcome {
    let dir = work.join("c5");
    let code = cli(&["momentum-visibility"], None, &dir);
    if code != 0 {
        return outcome(false, format!("momentum-visibility exited with {code}"));
    }
    let t = read_table(&dir.join("momentum_visibility.csv"), &MOMENTUM_COLUMNS).unwrap().rows;
    let (c, v, acc) =
        (column(&MOMENTUM_COLUMNS, "bin_center_hbar_k0"), column(&MOMENTUM_COLUMNS, "V"), column(&MOMENTUM_COLUMNS, "bragg_acceptance"));
    let (peak_p, _) = t
        .iter()
        .filter(|r| !r[v].is_nan())
        .map(|r| (r[c], r[v]))
        .fold((f64::NAN, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let side: Vec<&Vec<f64>> = t.iter().filter(|r| r[c] * peak_p > 0.0).collect();
    let x: Vec<f64> = side.iter().map(|r| r[c]).collect();
    let vy: Vec<f64> = side.iter().map(|r| if r[v].is_nan() { 0.0 } else { r[v] }).collect();
    let ay: Vec<f64> = side.iter().map(|r| r[acc]).collect();
    let (vw, aw) = (fwhm(&x, &vy), fwhm(&x, &ay));
    let pass = (peak_p.abs() - 1.0).abs() <= 0.125 + 1e-12 && matches!((vw, aw), (Some(a), Some(b)) if a < b);
    outcome(pass, format!("argmax V at {peak_p} hbar*k0; FWHM of V(p) {vw:?} vs acceptance {aw:?}"))
}

fn criterion_6() -> Outcome {
    let mut worst_stage = 0.0f64;
    for d in [2.8e-6, 10e-6] {
        let s = Scenario::new(ExperimentParams::default().with_mean_distance(d)).unwrap();
        for phase in [0.0, 1.3, PI] {
            for (_, total) in stage_totals(&s, d, phase).unwrap() {
                worst_stage = worst_stage.max((total - 1.0).abs());
            }
        }
    }
    let s = Scenario::new(ExperimentParams::default()).unwrap();
    let mut worst_port = 0.0f64;
    for series in [run_sequence(&s, 2.8e-6).unwrap(), beam_average(&s).unwrap()] {
        let (plus, minus) = (series.nearest_bin(1.0), series.nearest_bin(-1.0));
        let sums: Vec<f64> = series.counts.iter().map(|row| row[plus] + row[minus]).collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        worst_port = sums.iter().map(|x| (x - mean).abs() / mean).fold(worst_port, f64::max);
    }
    let pass = worst_stage <= 1e-9 && worst_port <= 1e-6;
    outcome(pass, format!("worst stage probability error {worst_stage:.2e}, port-sum variation {worst_port:.2e}"))
}

fn criterion_7() -> Outcome {
    let phases = equispaced_phases(8);
    let counts: Vec<f64> = phases.iter().map(|&x| 100.0 + 5.0 * (x + 0.3).cos()).collect();
    let f = fit_fringe(&phases, &counts, Weighting::None).unwrap();
    let residual: f64 = phases
        .iter()
        .zip(&counts)
        .map(|(&x, &y)| (f.n0 + f.na * (x + f.phi0).cos() - y).abs())
        .fold(0.0, f64::max);
    let exact = residual < 1e-10
        && (f.n0 - 100.0).abs() < 1e-10
        && (f.na - 5.0).abs() < 1e-10
        && (f.phi0 - 0.3).abs() < 1e-10
        && (f.visibility - 0.05).abs() < 1e-12;
    let phases = equispaced_phases(12);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (repeats, mut covered) = (2000, 0);
    for _ in 0..repeats {
        let counts: Vec<f64> = phases
            .iter()
            .map(|&x| Poisson::new(1000.0 * (1.0 + 0.06 * (x + 0.7).cos())).unwrap().sample(&mut rng))
            .collect();
        let f = fit_fringe(&phases, &counts, Weighting::Poisson).unwrap();
        if f.ci95.0 <= 0.06 && 0.06 <= f.ci95.1 {
            covered += 1;
        }
    }
    let coverage = covered as f64 / repeats as f64;
    let pass = exact && (coverage - 0.95).abs() <= 0.02;
    outcome(pass, format!("synthetic residual {residual:.1e}, CI95 coverage {coverage:.4} over {repeats} repeats"))
}

fn criterion_8(work: &Path) -> Outcome {
    let dir = work.join("c8");
    let code = cli(&["scan-distance"], None, &dir);
    if code != 0 {
        return outcome(false, format!("scan-distance exited with {code}"));
    }
    let text = std::fs::read_to_string(dir.join("visibility.csv")).unwrap();
    let mut curves: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap().split(',').collect::<Vec<_>>(), VISIBILITY_COLUMNS);
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let k = usize::from(f[4] == "semiclassical");
        curves[k].push((f[0].parse().unwrap(), f[1].parse().unwrap()));
    }
    let half = |c: &[(f64, f64)]| {
        let v0 = c[0].1;
        c.windows(2).find(|w| w[1].1 <= 0.5 * v0).map(|w| {
            let (x0, y0, x1, y1) = (w[0].0, w[0].1, w[1].0, w[1].1);
            x0 + (0.5 * v0 - y0) * (x1 - x0) / (y1 - y0)
        })
    };
    let (hq, hs) = (half(&curves[0]), half(&curves[1]));
    let pass = matches!((hq, hs), (Some(a), Some(b)) if a / b <= 2.0 && b / a <= 2.0);
    let um = |x: Option<f64>| x.map_or_else(|| "none".into(), |v| format!("{:.2} um", v * 1e6));
    outcome(pass, format!("half-visibility distance quantum {} vs semiclassical {}", um(hq), um(hs)))
}

fn criterion_9(work: &Path) -> Outcome {
    let config = r#"{"shot_noise": true, "distances_m": [2e-6, 6e-6]}"#;
    let mut identical = true;
    let mut compared = 0;
    for cmd in ["fringe", "scan-distance"] {
        let dirs: Vec<PathBuf> = (0..2).map(|i| work.join(format!("c9-{cmd}-{i}"))).collect();
        for d in &dirs {
            let path = d.with_extension("json");
            std::fs::write(&path, config).unwrap();
            let status = Command::new(bin())
                .args([cmd, "--seed", "7", "--config"])
                .arg(&path)
                .arg("--out")
                .arg(d)
                .output()
                .unwrap()
                .status;
            if !status.success() {
                return outcome(false, format!("{cmd} failed"));
            }
        }
        let mut names: Vec<_> = std::fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            compared += 1;
            identical &= std::fs::read(dirs[0].join(&name)).unwrap() == std::fs::read(dirs[1].join(&name)).unwrap();
        }
    }
    outcome(identical && compared > 0, format!("{compared} CSV files compared byte for byte"))
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let work = tempfile::tempdir().expect("temp dir");
    let w = work.path();
    let criteria: Vec<(u32, &str, Duration, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "emission kernel integrals", Duration::from_secs(1), Box::new(criterion_1)),
        (2, "free-space limit at 54 um", Duration::from_secs(60), Box::new(|| criterion_2(w))),
        (3, "near-mirror coherence at 2.8 um", Duration::from_secs(600), Box::new(|| criterion_3(w))),
        (4, "point-atom decay envelope", Duration::from_secs(60), Box::new(criterion_4)),
        (5, "momentum-resolved structure", Duration::from_secs(600), Box::new(|| criterion_5(w))),
        (6, "unitarity and port complementarity", Duration::from_secs(60), Box::new(criterion_6)),
        (7, "fit correctness", Duration::from_secs(120), Box::new(criterion_7)),
        (8, "cross-model half-visibility distance", Duration::from_secs(600), Box::new(|| criterion_8(w))),
        (9, "determinism", Duration::from_secs(600), Box::new(|| criterion_9(w))),
    ];
    let mut failures = 0;
    for (id, name, budget, run) in &criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        failures += usize::from(!pass);
        println!(
            "{} criterion {id} ({name}): {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
