use std::path::Path;
use std::process::{Command, Output};

use middelay::cli::to_json;
use middelay::selfcheck::planted_input;
use serde_json::Value;

fn middelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_middelay"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn design_emits_the_pendulum_quasipolynomial() {
    let dir = tempfile::tempdir().unwrap();
    let inp = write(
        dir.path(),
        "d.json",
        r#"{"n": 2, "m": 1, "tau": 1, "lambda0": -1, "A": 1}"#,
    );
    let out_dir = dir.path().join("out");
    let o = middelay(&["-o", out_dir.to_str().unwrap(), "design", &inp]);
    assert_eq!(o.status.code(), Some(0));
    let q = read_json(&out_dir.join("quasi.json"));
    assert_eq!(q["n"], 2);
    assert_eq!(q["m"], 1);
    let a: Vec<f64> = serde_json::from_value(q["a"].clone()).unwrap();
    let alpha: Vec<f64> = serde_json::from_value(q["alpha"].clone()).unwrap();
    assert!((a[0] - 1.0).abs() < 1e-14 && a[1].abs() < 1e-14);
    assert!((alpha[0] + 2.0 / std::f64::consts::E).abs() < 1e-14 && alpha[1].abs() < 1e-14);
    let report = read_json(&out_dir.join("design.json"));
    assert_eq!(report["input"]["A"].as_f64(), Some(1.0));
    assert_eq!(report["result"]["multiplicity"], 3);
}

#[test]
fn pendulum_design_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("p");
    let o = middelay(&["-o", out_dir.to_str().unwrap(), "pendulum", "--tau", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    let inp = out_dir.join("certify_input.json");
    let o = middelay(&["certify", inp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let cert: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["result"]["verdict"], "certified");
    assert_eq!(cert["result"]["multiplicity"], 3);
}

#[test]
fn method_silent_beyond_unit_product() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("p");
    let o = middelay(&["-o", out_dir.to_str().unwrap(), "pendulum", "--tau", "1.3"]);
    assert_eq!(o.status.code(), Some(0));
    let o = middelay(&[
        "certify",
        out_dir.join("certify_input.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let cert: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["result"]["verdict"], "not-certified-by-method");
    assert_eq!(cert["result"]["numeric"]["dominant"], true);
}

#[test]
fn planted_root_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let inp = write(dir.path(), "c.json", &to_json(&planted_input()));
    let o = middelay(&["certify", &inp]);
    assert_eq!(o.status.code(), Some(3));
    let cert: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["result"]["verdict"], "refuted");
}

#[test]
fn malformed_input_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let inp = write(
        dir.path(),
        "bad.json",
        "{\"n\": 2,\n  \"m\": 1,\n  \"tau\": \"one\"}",
    );
    let o = middelay(&["design", &inp]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.json:3:"), "{err}");
    let inp = write(
        dir.path(),
        "neutral.json",
        r#"{"n": 1, "m": 1, "tau": 1, "a": [0], "alpha": [1, 1]}"#,
    );
    let o = middelay(&["spectrum", &inp]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(middelay(&["freq-bound"]).status.code(), Some(1));
    assert_eq!(middelay(&["pendulum", "--tau", "2"]).status.code(), Some(1));
    assert_eq!(middelay(&["--help"]).status.code(), Some(0));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let inp = write(dir.path(), "c.json", &to_json(&planted_input()));
    let q = write(
        dir.path(),
        "q.json",
        r#"{"n": 2, "m": 1, "tau": 1, "a": [1, 0], "alpha": [-0.7357588823428847, 0]}"#,
    );
    for args in [
        vec!["certify", inp.as_str()],
        vec![
            "spectrum",
            q.as_str(),
            "--re-min",
            "-6",
            "--re-max",
            "1",
            "--im-min",
            "-10",
            "--im-max",
            "10",
        ],
        vec!["freq-bound", q.as_str(), "--lambda0", "-1"],
    ] {
        let mut outs = Vec::new();
        for k in 0..2 {
            let d = dir.path().join(format!("{}-{k}", args[0]));
            let mut full = vec!["-o", d.to_str().unwrap()];
            full.extend(&args);
            middelay(&full);
            let mut files: Vec<_> = std::fs::read_dir(&d)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            outs.push(
                files
                    .iter()
                    .map(|f| std::fs::read(f).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        assert_eq!(outs[0], outs[1], "{}", args[0]);
    }
}

#[test]
fn spectrum_csv_and_freq_bound() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(
        dir.path(),
        "q.json",
        r#"{"n": 2, "m": 1, "tau": 1, "a": [1, 0], "alpha": [-0.7357588823428847, 0]}"#,
    );
    let out = dir.path().join("s");
    let o = middelay(&[
        "-o",
        out.to_str().unwrap(),
        "spectrum",
        &q,
        "--re-min",
        "-2",
        "--re-max",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("roots.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im,multiplicity,residual"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((first[0].parse::<f64>().unwrap() + 1.0).abs() < 1e-4);
    assert_eq!(first[2], "3");

    let o = middelay(&["freq-bound", &q]);
    assert_eq!(o.status.code(), Some(0));
    let o = middelay(&["freq-bound", &q, "--lambda0", "-1", "--max-ord", "3"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["result"]["dominance_flag"], true);
    assert_eq!(r["input"]["max_ord"], 3);
}

#[test]
fn tau_other_than_one_is_rejected_by_freq_bound() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(
        dir.path(),
        "q.json",
        r#"{"n": 1, "m": 0, "tau": 2, "a": [1], "alpha": [0.5]}"#,
    );
    assert_eq!(middelay(&["freq-bound", &q]).status.code(), Some(1));
}

#[test]
fn simulate_and_figure2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "sim.json",
        r#"{"quasi": {"n": 2, "m": 1, "tau": 1, "a": [1, 0], "alpha": [-0.7357588823428847, 0]},
            "history": {"kind": "polynomial", "coeffs": [1]}, "t_end": 30, "dt": 0.01, "window": [5, 30]}"#,
    );
    let out = dir.path().join("o");
    let o = middelay(&["-o", out.to_str().unwrap(), "simulate", &p]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = read_json(&out.join("simulate.json"));
    let rate = r["result"]["fit"]["rate"].as_f64().unwrap();
    assert!((rate + 1.0).abs() < 0.1, "{rate}");
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,y,y1\n"));
    assert_eq!(csv.lines().count(), 3002);

    let o = middelay(&[
        "-o",
        out.to_str().unwrap(),
        "pendulum",
        "--figure2",
        "--tau-grid",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("figure2.csv")).unwrap();
    assert!(csv.starts_with("ratio,tau,lambda0\n"));
    assert_eq!(csv.lines().count(), 71);
}

#[test]
fn specfun_eval_prints_full_precision() {
    let o = middelay(&[
        "specfun",
        "eval",
        "--a",
        "1",
        "--b",
        "2",
        "--re",
        "0",
        "--im",
        "6.283185307179586",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8(o.stdout).unwrap();
    let re: f64 = s.split_whitespace().next().unwrap().parse().unwrap();
    assert!(re.abs() < 1e-14, "{s}");
    let o = middelay(&[
        "specfun", "eval", "--a", "1", "--b", "3", "--re", "1", "--alpha", "0", "--beta", "1",
    ]);
    let s = String::from_utf8(o.stdout).unwrap();
    let v: f64 = s.split_whitespace().next().unwrap().parse().unwrap();
    // Φ(1, 4, 1) = 6(e − 5/2)
    assert!((v - 6.0 * (std::f64::consts::E - 2.5)).abs() < 1e-14, "{s}");
}
