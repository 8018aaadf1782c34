use mirrorwave_core::emission::{coherence_vs_distance_pointatom, direction_resolved_visibility, EmissionConfig};
use mirrorwave_core::grid::make_grid;
use mirrorwave_core::wavepacket::{build_wavepacket, WavepacketSpec};
use mirrorwave_core::ExperimentParams;

/// Largest deviation from the sinc envelope over `[0, 5 μm]` and the first
/// zero of the simulated curve.
fn envelope_check() -> (f64, f64) {
    let p = ExperimentParams::default();
    let g = make_grid(4096, 32.0, p.k0()).unwrap();
    let cfg = EmissionConfig::from_params(&p);
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
    let i = (1..vs.len() - 1).find(|&i| vs[i] < vs[i - 1] && vs[i] <= vs[i + 1]).unwrap();
    // refine the minimum by golden-section search
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
    (worst, 0.5 * (a + b))
}

#[test]
fn point_atom_follows_sinc_envelope() {
    let (worst, zero) = envelope_check();
    assert!(worst < 0.05, "{worst}");
    assert!((zero - 3.18e-6).abs() < 0.15e-6, "{zero}");
}
