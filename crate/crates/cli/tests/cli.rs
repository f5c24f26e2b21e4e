use std::path::Path;
use std::process::{Command, Output};

use lqdim::spectrum::estimate_from_finest;
use lqdim::{depth_for_level, presets, project_measure, OmegaSequence};

fn lqdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqdim")).args(args).output().unwrap()
}

fn run_scenario(dir: &Path, json: &str) -> Output {
    let cfg = dir.join("scenario.json");
    std::fs::write(&cfg, json).unwrap();
    let out = dir.join("out");
    lqdim(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn formula_scenario_reports_middle_thirds_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_scenario(dir.path(), r#"{"name": "mt", "mode": "formula", "ruleset": "middle-thirds", "q_grid": [2]}"#);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/formula.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("dq_formula_q2,")).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
    assert_eq!(format!("{v:.5}"), "0.63093");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "formula");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("out/timing.json").exists());
}

#[test]
fn malformed_scenarios_fail_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        r#"{"name": "x", "mode": "build""#,
        r#"{"name": "x", "mode": "build", "ruleset": "middle-thirds", "colour": 1}"#,
        r#"{"name": "x", "mode": "build", "ruleset": "middle-thirds", "q_grid": [1.0]}"#,
        r#"{"name": "x", "mode": "build", "ruleset": "middle-thirds", "level_window": [5, 6]}"#,
        r#"{"name": "x", "mode": "project", "ruleset": "middle-thirds"}"#,
        r#"{"name": "x", "mode": "build", "ruleset": "random-pair", "driving_weights": [0.9, 0.2]}"#,
        r#"{"name": "x", "mode": "convolve", "ruleset": "cantor:1/4"}"#,
    ] {
        let o = run_scenario(dir.path(), bad);
        assert_eq!(o.status.code(), Some(1), "{bad}");
        assert!(!dir.path().join("out").exists(), "{bad}");
    }
    let o = run_scenario(dir.path(), r#"{"name": "x", "mode": "formula", "ruleset": "middle-thirds", "extra": 0}"#);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

#[test]
fn single_direction_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_scenario(
        dir.path(),
        r#"{"name": "one", "mode": "project", "ruleset": "four-corner", "direction_count": 1,
            "q_grid": [2], "level_window": [6, 11], "extra_levels": 1}"#,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/directions_seed0.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();

    let rs = presets::four_corner(0.2, 1.0);
    let om = OmegaSequence::constant(0, 64, 1);
    let depth = depth_for_level(&rs, &om, 12).unwrap();
    let m = project_measure(&rs, &om, [1.0, 0.0], depth, 12).unwrap();
    let c = estimate_from_finest(&m, 2.0, (6, 11)).unwrap();
    assert_eq!(row[3], format!("{:.12}", c.dimension));
    assert_eq!(row[4], format!("{:.12}", c.residual));
}

#[test]
fn outputs_are_reproducible() {
    let scenario = r#"{"name": "rep", "mode": "build", "ruleset": "random-pair", "seeds": [3, 4],
        "q_grid": [1.5, 2], "level_window": [6, 10], "extra_levels": 1}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_scenario(a.path(), scenario).status.success());
    assert!(run_scenario(b.path(), scenario).status.success());
    for f in ["measure_seed3.csv", "spectrum_seed4.csv", "summary.csv", "manifest.json"] {
        let x = std::fs::read(a.path().join("out").join(f)).unwrap();
        let y = std::fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let direct = lqdim(&["build", "--preset", "random-pair", "--seed", "3", "--level", "11"]);
    assert_eq!(stdout(&direct).as_bytes(), std::fs::read(a.path().join("out/measure_seed3.csv")).unwrap());
}

#[test]
fn convolution_of_two_cantor_measures_fills_the_line() {
    let o = lqdim(&[
        "convolve", "sweep", "--preset", "cantor:1/4", "--theta", "cantor:1/3", "--q", "2", "--window", "8,13",
        "--t-count", "8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), "t,q,dimension,residual,closed_form,abs_err");
    let dims: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(dims.len(), 8);
    assert!(dims.iter().all(|&d| d >= 0.9), "{dims:?}");
}

#[test]
fn cocycle_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let eq = dir.path().join("eq.csv");
    let o = lqdim(&[
        "cocycle", "check", "--preset", "random-pair", "--instances", "40", "--equivalence", eq.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 41);
    assert_eq!(std::fs::read_to_string(eq).unwrap().lines().count(), 41);
    let bad = lqdim(&["cocycle", "check", "--preset", "random-pair", "--k", "0.5"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn decomposition_is_written_as_json() {
    let o = lqdim(&["decompose", "--pbar", "1/3,2/3", "--block-len", "3"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["block_len"], 3);
    let classes = v["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 4);
    let total: f64 = classes.iter().map(|c| c["r"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for c in classes {
        let words = c["fiber"].as_array().unwrap();
        let p: f64 = words.iter().map(|w| w["p"].as_f64().unwrap()).sum();
        assert!((p - 1.0).abs() < 1e-12);
    }
}

#[test]
fn orbit_of_constant_rotation_advances_by_alpha() {
    let o = lqdim(&["dynamics", "orbit", "--preset", "four-corner:0.2:0.5", "--steps", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fibers: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(fibers.len(), 5);
    for (i, f) in fibers.iter().enumerate() {
        assert!((f - 0.5 * i as f64).abs() < 1e-12, "{fibers:?}");
    }
}

#[test]
fn bad_arguments_exit_with_one() {
    assert_eq!(lqdim(&["build", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(lqdim(&["spectrum", "--preset", "middle-thirds", "--window", "8,9"]).status.code(), Some(1));
    assert_eq!(lqdim(&["formula", "--preset", "random-pair", "--weights", "1/2"]).status.code(), Some(1));
    assert_eq!(lqdim(&["formula"]).status.code(), Some(1));
}
