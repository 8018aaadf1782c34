use mirrorwave_core::analysis::{fit_outer_bins, momentum_resolved_visibility, visibility_vs_distance, Weighting};
use mirrorwave_core::emission::{emit_mixture, EmissionConfig};
use mirrorwave_core::grid::make_grid;
use mirrorwave_core::interferometer::{
    beam_average, detect, run_sequence, stage_totals, Detector, Scenario,
};
use mirrorwave_core::wavepacket::{build_wavepacket, density_moments, momentum_density, WavepacketSpec};
use mirrorwave_core::ExperimentParams;

fn scenario(d: f64) -> Scenario {
    Scenario::new(ExperimentParams::default().with_mean_distance(d)).unwrap()
}

#[test]
fn recoil_broadening_far_from_mirror() {
    let p = ExperimentParams::default();
    let g = make_grid(4096, 8.0, p.k0()).unwrap();
    let psi = build_wavepacket(&WavepacketSpec::gaussian(0.1, 54e-6), &g).unwrap();
    let mix = emit_mixture(&psi, &EmissionConfig::from_params(&p), &p).unwrap();
    assert!((mix.trace() - 1.0).abs() < 1e-9);
    let (_, rms0) = density_moments(&g, &psi.density());
    let (mean, rms) = density_moments(&g, &momentum_density(&mix));
    assert!(mean.abs() < 1e-6);
    let recoil = (rms * rms - rms0 * rms0).sqrt();
    assert!((recoil - 0.4f64.sqrt()).abs() < 0.01 * 0.4f64.sqrt(), "{recoil}");
}

#[test]
fn detector_counts_sum_to_atoms() {
    let s = scenario(2.8e-6);
    let psi = build_wavepacket(&s.packet, &s.grid).unwrap();
    let mix = emit_mixture(&psi, &s.emission, &s.params).unwrap();
    let h = detect(&mix, &Detector::default()).unwrap();
    assert!((h.counts.iter().sum::<f64>() / 1e5 - 1.0).abs() < 1e-9);
}

#[test]
fn stages_conserve_probability_at_default_settings() {
    let s = scenario(2.8e-6);
    for phase in [0.0, 2.0] {
        for (stage, total) in stage_totals(&s, 2.8e-6, phase).unwrap() {
            assert!((total - 1.0).abs() < 1e-9, "{stage}: {total}");
        }
    }
}

#[test]
fn near_mirror_ports_oscillate_in_antiphase() {
    let s = scenario(2.8e-6);
    let series = beam_average(&s).unwrap();
    assert!(series.metadata.shadowed_fraction > 0.0);
    let outer = fit_outer_bins(&series, &s.splitter, Weighting::None).unwrap();
    assert!(outer.plus.visibility > 0.02 && outer.plus.visibility < 0.3);
    let dphi = (outer.plus.phi0 - outer.minus.phi0).rem_euclid(2.0 * std::f64::consts::PI);
    assert!((dphi - std::f64::consts::PI).abs() < 0.2, "{dphi}");
}

#[test]
fn flat_phase_visibility_is_mirror_symmetric() {
    let s = scenario(2.8e-6);
    let series = run_sequence(&s, 2.8e-6).unwrap();
    // Poisson weighting gives each bin the shot-noise interval of its counts
    let bins = momentum_resolved_visibility(&series, &s.splitter, &s.params, 1.0, Weighting::Poisson).unwrap();
    let n = bins.len();
    for i in 1..n / 2 {
        let (a, b) = (&bins[i], &bins[n - 1 - i]);
        assert_eq!(a.center, -b.center);
        if let (Some(fa), Some(fb)) = (a.fit, b.fit) {
            assert!((fa.visibility - fb.visibility).abs() <= 1.96 * fa.sigma_v.hypot(fb.sigma_v), "bin {}", a.center);
        }
    }
}

#[test]
fn visibility_decays_with_distance() {
    let mut s = scenario(2.8e-6);
    s.averaging.samples = 8;
    let ds = [1e-6, 4e-6, 10e-6, 20e-6];
    let (quantum, semi) = visibility_vs_distance(&s, &ds, Weighting::None).unwrap();
    let v: Vec<f64> = quantum.points.iter().map(|p| p.visibility).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    assert!(v[3] < 0.2 * v[0]);
    let (hq, hs) = (quantum.half_visibility_distance().unwrap(), semi.half_visibility_distance().unwrap());
    assert!(hq / hs < 2.0 && hs / hq < 2.0, "{hq} {hs}");
}
