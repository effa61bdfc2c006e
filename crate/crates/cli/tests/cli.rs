//! End-to-end tests of the `battsize` binary: exit codes, rendered
//! values, output-file handling, and rerun determinism.

use std::process::{Command, Output};

fn battsize(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_battsize"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).expect("valid json output")
}

#[test]
fn size_reference_example() {
    let out = battsize(&[
        "size",
        "--lambda-d",
        "0.72",
        "--lambda-e",
        "0.8",
        "--alpha",
        "0.05",
        "--beta",
        "0.3",
        "--ep-size",
        "155",
        "--format",
        "json-text",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {:?}", out.stderr);
    let v = json(&out);
    assert_eq!(v["capacity"], 13);
    assert_eq!(v["physical_capacity"], 2015.0);
    assert_eq!(v["binding"], "depletion");
    assert!((v["k_alpha"].as_f64().unwrap() - 12.82).abs() < 0.01);
}

#[test]
fn size_infeasible_overflow_target_is_domain_error() {
    let out = battsize(&[
        "size", "--gamma", "0.9", "--alpha", "0.05", "--beta", "0.05",
    ]);
    assert_eq!(exit_code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unachievable"), "stderr: {err}");
}

#[test]
fn size_gamma_out_of_range_is_usage_error() {
    let out = battsize(&[
        "size", "--gamma", "1.2", "--alpha", "0.05", "--beta", "0.3",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn size_missing_required_flag_is_usage_error() {
    let out = battsize(&["size", "--gamma", "0.9", "--beta", "0.3"]);
    assert_eq!(exit_code(&out), 2);
    // Only one rate of the pair is also a usage error.
    let out = battsize(&[
        "size", "--lambda-d", "0.72", "--alpha", "0.05", "--beta", "0.3",
    ]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn analyze_capacity_one_equals_gamma() {
    let out = battsize(&[
        "analyze",
        "--lambda-d",
        "0.6",
        "--lambda-e",
        "1.0",
        "--lambda-c",
        "2.0",
        "--capacity",
        "1",
        "--format",
        "json-text",
    ]);
    assert_eq!(exit_code(&out), 0);
    let v = json(&out);
    assert!((v["p_e0"].as_f64().unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn analyze_unstable_rates_is_domain_error() {
    let out = battsize(&[
        "analyze",
        "--lambda-d",
        "2.0",
        "--lambda-e",
        "1.0",
        "--lambda-c",
        "1.0",
        "--capacity",
        "5",
    ]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn analyze_csv_and_json_agree() {
    let args = [
        "analyze",
        "--lambda-d",
        "0.72",
        "--lambda-e",
        "0.8",
        "--lambda-c",
        "0.9",
        "--capacity",
        "13",
    ];
    let csv = stdout(&battsize(&[&args[..], &["--format", "csv"]].concat()));
    let v = json(&battsize(&[&args[..], &["--format", "json-text"]].concat()));

    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    for (name, cell) in header.iter().zip(&cells) {
        let a: f64 = cell.parse().unwrap();
        let b = v[*name].as_f64().unwrap();
        let tol = 1e-11 * a.abs().max(1.0);
        assert!((a - b).abs() <= tol, "{name}: csv {a} vs json {b}");
    }
}

#[test]
fn oracle_reports_marginals_in_unit_interval() {
    let out = battsize(&[
        "oracle",
        "--lambda-d",
        "0.72",
        "--lambda-e",
        "0.8",
        "--lambda-c",
        "0.9",
        "--capacity",
        "13",
        "--format",
        "json-text",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {:?}", out.stderr);
    let v = json(&out);
    for key in ["p_e0_exact", "p_ek_exact", "p_d0_exact"] {
        let p = v[key].as_f64().unwrap();
        assert!((0.0..1.0).contains(&p), "{key} = {p}");
    }
    assert!(v["residual_norm"].as_f64().unwrap() < 1e-10);
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let args = [
        "simulate",
        "--lambda-d",
        "0.35",
        "--lambda-e",
        "0.5",
        "--lambda-c",
        "1.0",
        "--capacity",
        "5",
        "--horizon",
        "2000",
        "--replications",
        "4",
        "--seed",
        "7",
        "--format",
        "json-text",
    ];
    let a = battsize(&args);
    let b = battsize(&args);
    assert_eq!(exit_code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["rng_algorithm"], "chacha8");
    // A different seed must change the estimates.
    let mut other: Vec<&str> = args.to_vec();
    other[13] = "8";
    let c = battsize(&other);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sweep_writes_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = |name: &str| {
        vec![
            "sweep".to_string(),
            "--figure".into(),
            "compare".into(),
            "--gamma".into(),
            "0.7".into(),
            "--format".into(),
            "csv".into(),
            "--output".into(),
            dir.path().join(name).display().to_string(),
            "--svg".into(),
            dir.path().join(format!("{name}.svg")).display().to_string(),
        ]
    };
    let run = |name: &str| {
        let a: Vec<String> = args(name);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(exit_code(&battsize(&refs)), 0);
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let first = run("a.csv");
    let second = run("b.csv");
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("k_alpha"));
    assert!(text.contains("k_beta"));
    let svg = std::fs::read_to_string(dir.path().join("a.csv.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn relative_output_resolves_against_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_battsize"))
        .env("BATTSIZE_OUT_DIR", dir.path())
        .args([
            "size", "--gamma", "0.9", "--alpha", "0.05", "--beta", "0.3",
            "--format", "csv", "--output", "sizing.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("sizing.csv")).unwrap();
    assert!(text.contains("capacity"));
}

#[test]
fn validate_produces_grid_csv() {
    let out = battsize(&[
        "validate",
        "--gamma-grid",
        "0.5,0.9",
        "--k-grid",
        "3",
        "--horizon",
        "2000",
        "--replications",
        "4",
        "--seed",
        "42",
        "--format",
        "csv",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {:?}", out.stderr);
    let text = stdout(&out);
    assert!(text.contains("analytic_p_e0"));
    assert!(text.contains("oracle_p_e0"));
    assert!(text.contains("sim_p_e0"));
    // Two data rows beyond provenance comments and the header.
    let data_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .count();
    assert_eq!(data_rows, 3);
}
