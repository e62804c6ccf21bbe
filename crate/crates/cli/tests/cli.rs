use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run_args(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("modkk").chain(args.iter().copied());
    let code = modkk::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn with_config(json: &str, extra: &[&str]) -> (i32, String, String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, json).unwrap();
    let mut args = vec!["--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, out, err) = run_args(&args);
    (code, out, err, dir)
}

fn parse(out: &str) -> Value {
    serde_json::from_str(out).unwrap()
}

#[test]
fn malformed_config_is_a_usage_error() {
    let (code, _, err, _d) = with_config("{ not json", &["verify"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _, _d) = with_config(r#"{"command": "verify", "bogus": 1}"#, &[]);
    assert_eq!(code, 2);
    let (code, _, _, _d) = with_config(r#"{"command": "verify", "verify": {"dimension": 3}}"#, &[]);
    assert_eq!(code, 2);
}

#[test]
fn missing_or_conflicting_command_is_a_usage_error() {
    assert_eq!(run_args(&[]).0, 2);
    let (code, _, _, _d) = with_config(r#"{"command": "sweep"}"#, &["verify"]);
    assert_eq!(code, 2);
    assert_eq!(run_args(&["verify", "--tol", "-1"]).0, 2);
    assert_eq!(run_args(&["fractal", "--only", "modadj"]).0, 2);
}

#[test]
fn unknown_names_are_usage_errors() {
    assert_eq!(run_args(&["verify", "--only", "nope"]).0, 2);
    assert_eq!(run_args(&["sweep", "--only", "nope"]).0, 2);
    let (code, _, _, _d) =
        with_config(r#"{"command": "verify", "tolerances": {"nope": 1.0}}"#, &[]);
    assert_eq!(code, 2);
}

#[test]
fn only_selects_a_single_check() {
    let (code, out, _) = run_args(&["verify", "--only", "modadj"]);
    assert_eq!(code, 0);
    let report = parse(&out);
    let results = report["results"].as_object().unwrap();
    assert_eq!(results.keys().collect::<Vec<_>>(), vec!["modadj"]);
}

#[test]
fn tolerance_override_can_fail_a_check() {
    let (code, out, _) = run_args(&["verify", "--only", "strlimzer", "--tol", "1e-6"]);
    assert_eq!(code, 1);
    assert_eq!(
        parse(&out)["results"]["strlimzer"]["pass"],
        Value::Bool(false)
    );
}

#[test]
fn verify_reports_are_reproducible() {
    let a = run_args(&["verify", "--seed", "7"]);
    let b = run_args(&["verify", "--seed", "7"]);
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
    let c = run_args(&["verify", "--seed", "8"]);
    assert_ne!(a.1, c.1);
}

#[test]
fn deficient_generators_exit_with_failure() {
    let cfg =
        r#"{"command": "product", "product": {"module": {"rows": 5, "k": 1, "generators": 2}}}"#;
    let (code, _, err, _d) = with_config(cfg, &[]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("GeneratorDeficient"), "{err}");
}

#[test]
fn trivial_product_reproduces_the_cycle() {
    let cfg = r#"{"command": "product", "product": {"module": {"trivial": true}, "cycle": {"multiplicity": 3}}}"#;
    let (code, out, err, _d) = with_config(cfg, &[]);
    assert_eq!(code, 0, "{err}");
    let report = parse(&out);
    assert_eq!(report["trivial_module"]["d_difference"], 0.0);
    assert_eq!(report["trivial_module"]["delta_difference"], 0.0);
    assert_eq!(report["f_connection"]["norm"], 0.0);
}

#[test]
fn sweep_writes_one_csv_per_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let (code, out, _) = run_args(&[
        "sweep",
        "--only",
        "error-term",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(parse(&out)["estimates"].as_array().unwrap().len(), 1);
    let csv = std::fs::read_to_string(out_dir.join("error-term.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,norm,bound,slope_so_far");
    assert_eq!(lines.len(), 1 + 41 + 1);
    assert!(lines.last().unwrap().starts_with("# estimate=error-term"));
    for row in &lines[1..42] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 4);
        for f in &fields[..3] {
            f.parse::<f64>().unwrap();
        }
    }
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn empty_lambda_grid_is_a_usage_error() {
    let (code, _, _, _d) = with_config(r#"{"command": "sweep", "sweep": {"lambdas": []}}"#, &[]);
    assert_eq!(code, 2);
}

#[test]
fn f_connection_sweep_is_available() {
    let (code, out, err) = run_args(&["sweep", "--only", "f-connection"]);
    assert_eq!(code, 0, "{err}");
    let slope = parse(&out)["estimates"][0]["slope"].as_f64().unwrap();
    assert!(slope <= -0.70, "{slope}");
}

#[test]
fn fractal_writes_a_full_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("f");
    let (code, out, err) = run_args(&["fractal", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report = parse(&out);
    assert_eq!(report["n_points"], 256);
    let csv = std::fs::read_to_string(out_dir.join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 256);
    assert!(Path::new(&out_dir.join("counting.csv")).exists());
}

#[test]
fn fractal_test_mode_uses_the_plain_dirac() {
    let cfg = r#"{"command": "fractal", "fractal": {"test_mode": true, "intervals": [[0, 1]], "n_points": 64, "variant": "fourier"}}"#;
    let (code, out, err, _d) = with_config(cfg, &[]);
    assert!(code == 0 || code == 1, "{err}");
    assert!(parse(&out)["symmetry_defect"].as_f64().unwrap() < 1e-8);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_modkk");
    let ok = Command::new(bin)
        .args(["verify", "--only", "beta"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin)
        .args(["verify", "--frobnicate"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let threads = Command::new(bin)
        .env("MODKK_THREADS", "zero")
        .args(["verify"])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    let one = Command::new(bin)
        .env("MODKK_THREADS", "1")
        .args(["verify", "--only", "beta"])
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
}

#[test]
fn overlapping_intervals_are_accepted() {
    let cfg = r#"{"command": "fractal", "fractal": {"intervals": [[0, 1], [0.5, 1.5]], "n_points": 128}}"#;
    let (code, out, err, _d) = with_config(cfg, &[]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(parse(&out)["n_points"], 128);
}
