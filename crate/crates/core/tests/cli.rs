use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-l1"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_realizable_csv(path: &Path, n: usize) {
    let mut text = String::from("x1,x2,y\n");
    for i in 0..n {
        let a = ((i * 7) % 13) as f64 / 13.0 - 0.5;
        let b = ((i * 5) % 11) as f64 / 11.0 - 0.5;
        text.push_str(&format!("{a},{b},{}\n", 0.3 * a - 0.6 * b));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn check_psi() {
    let out = run(&["check-psi"]);
    assert_eq!(code(&out), 0);
    let reports = json(&out);
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("envelope: pass"));
    assert_eq!(code(&run(&["check-psi", "--range", "1e6", "--kind", "logquad"])), 0);
    assert_eq!(code(&run(&["check-psi", "--grid-points", "1"])), 2);
    assert_eq!(code(&run(&["check-psi", "--range", "-1"])), 2);
    assert_eq!(code(&run(&["check-psi", "--kind", "cubic"])), 2);
}

#[test]
fn mean() {
    let out = run_stdin(&["mean", "--stdin"], "1\n1\n1\n");
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["estimate"], 1.0);

    let out = run_stdin(&["mean", "--stdin", "--kind", "saturating"], "-5\n5\n");
    assert_eq!(json(&out)["estimate"].as_f64().unwrap(), 0.0);

    let out = run_stdin(&["mean", "--stdin", "--alpha", "1e-9"], "0\n1\n2\n3\n4\n");
    let v = json(&out);
    assert!((v["estimate"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(v["sample_mean"], 2.0);
    assert_eq!(v["variance_plugin_used"], false);

    let out = run_stdin(&["mean", "--stdin", "--header"], "value\n1\n2\n30\n");
    let v = json(&out);
    assert_eq!(v["variance_plugin_used"], true);
    assert_eq!(v["n"], 3);

    let out = run_stdin(&["mean", "--stdin", "--delta", "0.05"], "1\n2\n3\n10\n");
    let with_delta = json(&out)["alpha"].as_f64().unwrap();
    let plain = json(&run_stdin(&["mean", "--stdin"], "1\n2\n3\n10\n"))["alpha"].as_f64().unwrap();
    assert!((with_delta / plain - 20f64.ln().sqrt()).abs() < 1e-12);

    assert_eq!(code(&run_stdin(&["mean", "--stdin"], "")), 1);
    assert_eq!(code(&run_stdin(&["mean", "--stdin"], "1\nabc\n")), 1);
    assert_eq!(code(&run(&["mean", "--input", "/definitely/not/here.csv"])), 1);
    assert_eq!(code(&run(&["mean"])), 2);
    assert_eq!(code(&run_stdin(&["mean", "--stdin", "--alpha", "-1"], "1\n")), 2);
    assert_eq!(code(&run_stdin(&["mean", "--stdin", "--bogus"], "1\n")), 2);
}

#[test]
fn fit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    write_realizable_csv(&csv, 100);
    let csv = csv.to_str().unwrap();

    let out = run(&["fit", "--input", csv, "--header", "--estimator", "erm-l1", "--B", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["objective_value"].as_f64().unwrap() <= 1e-4);
    assert!(v["alpha"].is_null());
    let w: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
    assert!((w[0] - 0.3).abs() < 1e-3 && (w[1] + 0.6).abs() < 1e-3);

    let report = dir.path().join("fit.json");
    let out = run(&[
        "fit", "--input", csv, "--header", "--estimator", "trunc-l1", "--B", "1", "--alpha", "auto", "--delta", "0.1",
        "--iters", "500", "--restarts", "4", "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!((v["alpha"].as_f64().unwrap() - 0.41712).abs() < 1e-5);
    assert_eq!(v["estimator"], "trunc-l1");
    for key in ["weights", "objective_value", "saturation_fraction", "wall_time", "starts_tried"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let out = run(&["fit", "--input", csv, "--header", "--estimator", "minmax-l2", "--B", "1", "--alpha", "0.5", "--iters", "300"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["u"].is_array());
    let out = run(&["fit", "--input", csv, "--header", "--estimator", "erm-l2", "--B", "1"]);
    assert!(json(&out)["objective_value"].as_f64().unwrap() < 1e-12);

    assert_eq!(code(&run(&["fit", "--input", csv, "--estimator", "bogus", "--B", "1"])), 2);
    assert_eq!(code(&run(&["fit", "--input", csv, "--header", "--estimator", "trunc-l1", "--B", "1", "--alpha", "nope"])), 2);
    assert_eq!(code(&run(&["fit", "--input", csv, "--header", "--estimator", "erm-l1", "--B", "-1"])), 2);
    assert_eq!(code(&run(&["fit", "--input", csv, "--header", "--estimator", "trunc-l1", "--B", "1", "--delta", "0.7"])), 2);
    // the header row is not numeric
    assert_eq!(code(&run(&["fit", "--input", csv, "--estimator", "erm-l1", "--B", "1"])), 1);
}

#[test]
fn bounds() {
    let base = ["bounds", "--n", "100", "--d", "2", "--B", "1", "--mean-norm", "1", "--mean-sq-norm", "1", "--sup-l2", "2"];
    let mut args = base.to_vec();
    args.extend(["--delta", "0.1", "--epsilon", "0.01"]);
    let v = json(&run(&args));
    assert!((v["theorem1_bound"].as_f64().unwrap() - 1.6886).abs() < 1e-4);
    assert!(v.get("erm_bound").is_none());

    let v = json(&run(&[
        "bounds", "--n", "10000", "--d", "1", "--B", "1", "--delta", "0.05", "--mean-norm", "1", "--mean-sq-norm", "1",
        "--sup-l2", "1", "--D", "1",
    ]));
    assert!((v["erm_bound"].as_f64().unwrap() - 0.088955).abs() < 1e-6);

    let mut bad = base.to_vec();
    bad.extend(["--delta", "0.7"]);
    assert_eq!(code(&run(&bad)), 2);
    assert_eq!(code(&run(&["bounds", "--n", "10"])), 2);
}

const ZERO_NOISE_SPEC: &str = r#"{
    "task": {"d": 2, "w_true": [0.4, -0.2], "B": 1.0,
             "input_dist": {"kind": "GaussianIso", "sigma_x": 1.0},
             "noise_dist": {"kind": "Gaussian", "sigma": 0.0}},
    "estimators": [{"kind": "ErmL1"}, {"kind": "TruncatedL1"}],
    "n_grid": [50],
    "trials": 1,
    "delta": 0.05,
    "base_seed": 3,
    "risk_method": {"kind": "Analytic"},
    "solver": {"iterations": 500, "restarts": 4}
}"#;

#[test]
fn experiment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, ZERO_NOISE_SPEC).unwrap();
    let spec = spec.to_str().unwrap();

    let mut csvs = Vec::new();
    for (k, jobs) in ["1", "2"].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("out{k}"));
        let out = run(&["experiment", "--spec", spec, "--mode", "coverage", "--out", out_dir.to_str().unwrap(), "--jobs", jobs]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "estimator,n,trial,excess_risk,alpha,bound,seconds");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let risk: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
            assert!((0.0..=1e-4).contains(&risk), "{row}");
        }
        let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["mode"], "coverage");
        assert_eq!(summary["coverage"][0]["coverage"], 1.0);
        assert!(out_dir.join("results.json").exists());
        csvs.push(text);
    }
    assert_eq!(csvs[0], csvs[1]);

    let timed = dir.path().join("timed");
    let out = run(&["experiment", "--spec", spec, "--out", timed.to_str().unwrap(), "--timing"]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(timed.join("results.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| !l.ends_with(',')));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, ZERO_NOISE_SPEC.replace("[50]", "[50, 20]")).unwrap();
    let out = run(&["experiment", "--spec", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));

    std::fs::write(&bad, r#"{"task": 3}"#).unwrap();
    assert_eq!(code(&run(&["experiment", "--spec", bad.to_str().unwrap(), "--out", "/tmp/unused"])), 2);
    assert_eq!(code(&run(&["experiment", "--spec", spec, "--out", "/tmp/unused", "--mode", "plot"])), 2);
    assert_eq!(code(&run(&["experiment", "--spec", spec, "--out", "/tmp/unused", "--jobs", "0"])), 2);
    assert_eq!(code(&run(&["experiment", "--spec", "/no/such/spec.json", "--out", "/tmp/unused"])), 1);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}
