use std::path::Path;
use std::process::{Command, Output};

use mirrorwave::commands::{EMIT_COLUMNS, FIT_COLUMNS, FRINGE_COLUMNS, VISIBILITY_COLUMNS};
use mirrorwave::output::{read_table, VERSION};

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mirrorwave"));
    cmd.args(args).arg("--out").arg(dir);
    if let Some(json) = config {
        let path = dir.with_extension("json");
        std::fs::write(&path, json).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_owned()
}

#[test]
fn emitted_density_is_normalised() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("emit");
    assert!(run(&["emit-pattern"], None, &dir).status.success());
    let t = read_table(&dir.join("emit_pattern.csv"), &EMIT_COLUMNS).unwrap();
    let dp = t.rows[1][0] - t.rows[0][0];
    for col in [1, 2, 3] {
        let total: f64 = t.rows.iter().map(|r| r[col]).sum::<f64>() * dp;
        assert!((total - 1.0).abs() < 1e-9, "column {col}: {total}");
    }
    assert!(first_line(&dir.join("emit_pattern.csv")).starts_with(&format!("# mirrorwave {VERSION} config_hash=")));
}

#[test]
fn malformed_key_exits_with_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["emit-pattern"], Some(r#"{"detector": {"bin_widht_hbar_k0": 0.125}}"#), &tmp.path().join("x"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bin_widht_hbar_k0"));
}

#[test]
fn precondition_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let few = r#"{"phases": {"values_rad": [0.0, 0.5, 1.0]}}"#;
    assert_eq!(run(&["fringe"], Some(few), &tmp.path().join("a")).status.code(), Some(2));
    let negative = r#"{"distances_m": [-1e-6]}"#;
    assert_eq!(run(&["scan-distance"], Some(negative), &tmp.path().join("b")).status.code(), Some(2));
    let coarse = r#"{"grid": {"n_points": 32}}"#;
    assert_eq!(run(&["fringe"], Some(coarse), &tmp.path().join("c")).status.code(), Some(2));
}

#[test]
fn single_distance_scan_writes_one_row_per_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scan");
    let cfg = r#"{"distances_m": [3e-6], "averaging": {"samples": 4}}"#;
    assert!(run(&["scan-distance"], Some(cfg), &dir).status.success());
    let text = std::fs::read_to_string(dir.join("visibility.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], VISIBILITY_COLUMNS.join(","));
    assert_eq!(rows.len(), 3);
    assert!(rows[1].ends_with(",quantum") && rows[2].ends_with(",semiclassical"));
}

#[test]
fn fit_round_trip_reproduces_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fringe");
    let cfg = r#"{"averaging": {"samples": 2}}"#;
    assert!(run(&["fringe", "--plot"], Some(cfg), &dir).status.success());
    assert!(dir.join("fringe.svg").exists());
    read_table(&dir.join("fringe.csv"), &FRINGE_COLUMNS).unwrap();
    let refit = tmp.path().join("refit");
    let input = dir.join("fringe.csv");
    let out = run(&["fit", input.to_str().unwrap()], Some(cfg), &refit);
    assert!(out.status.success());
    let a = read_table(&dir.join("fits.csv"), &FIT_COLUMNS).unwrap();
    let b = read_table(&refit.join("fits.csv"), &FIT_COLUMNS).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (x, y) in a.rows.iter().zip(&b.rows) {
        for (u, v) in x.iter().zip(y) {
            assert!((u.is_nan() && v.is_nan()) || u == v);
        }
    }
}

#[test]
fn fit_rejects_wrong_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "phase,counts\n0,1\n").unwrap();
    let out = run(&["fit", bad.to_str().unwrap()], None, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_recovers_synthetic_fringe_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("synthetic.csv");
    let mut text = String::from("# synthetic\nphi_B_rad,bin_center_hbar_k0,counts\n");
    for i in 0..8 {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / 8.0;
        text.push_str(&format!("{phi},1,{}\n", 100.0 + 5.0 * (phi + 0.3).cos()));
        text.push_str(&format!("{phi},-1,100\n"));
    }
    std::fs::write(&input, text).unwrap();
    let dir = tmp.path().join("o");
    assert!(run(&["fit", input.to_str().unwrap()], None, &dir).status.success());
    let t = read_table(&dir.join("fits.csv"), &FIT_COLUMNS).unwrap();
    let v = FIT_COLUMNS.iter().position(|c| *c == "V").unwrap();
    let phi0 = FIT_COLUMNS.iter().position(|c| *c == "phi0_rad").unwrap();
    assert_eq!(t.rows[0][0], -1.0);
    assert!(t.rows[0][v] < 1e-12);
    assert!((t.rows[1][v] - 0.05).abs() < 1e-12);
    assert!((t.rows[1][phi0] - 0.3).abs() < 1e-10);
}

#[test]
fn defaults_parse_back() {
    let out = Command::new(env!("CARGO_BIN_EXE_mirrorwave")).arg("defaults").output().unwrap();
    assert!(out.status.success());
    let cfg = mirrorwave::ScenarioConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, mirrorwave::ScenarioConfig::default());
}
