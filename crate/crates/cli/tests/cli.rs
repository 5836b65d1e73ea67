use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dtcbf"));
    c.env("DTCBF_LOG", "quiet");
    c
}

fn case_study() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/wang2023.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_problem(dir: &Path, name: &str, body: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(body).unwrap()).unwrap();
    path
}

fn disk() -> Value {
    serde_json::json!({
        "n": 2, "m": 1,
        "f": ["0.5*x1 + u1", "0.5*x2"],
        "h": "1 - x1^2 - x2^2",
        "gamma": {"linear": 0.5},
        "pi": ["-0.1*x1"],
        "U": {"lower": [-1], "upper": [1]},
        "X": {"lower": [-1.5, -1.5], "upper": [1.5, 1.5]}
    })
}

#[test]
fn known_policy_is_falsified() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdict.json");
    let o = run(&[
        "verify",
        case_study().to_str().unwrap(),
        "--mode",
        "known",
        "--deterministic",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = read_json(&out);
    assert_eq!(v["verdict"], "counterexample");
    assert_eq!(v["counterexample"]["pass"], true);
    assert!(v["counterexample"]["barrier"].as_f64().unwrap() >= 0.0);
    assert!(v["counterexample"]["known"]["value"].as_f64().unwrap() < 0.0);
}

#[test]
fn unknown_policy_verifies_and_dumps_tile_the_box() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdict.json");
    let policy = dir.path().join("policy.csv");
    let subdomains = dir.path().join("subdomains.csv");
    let o = run(&[
        "verify",
        case_study().to_str().unwrap(),
        "--mode",
        "unknown",
        "--out",
        out.to_str().unwrap(),
        "--dump-policy",
        policy.to_str().unwrap(),
        "--dump-subdomains",
        subdomains.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = read_json(&out);
    assert_eq!(v["verdict"], "valid");
    assert_eq!(v["policy"], policy.to_str().unwrap());

    let mut r = csv::Reader::from_path(&policy).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["id", "x1_lb", "x1_ub", "x2_lb", "x2_ub", "u1", "u2"]
    );
    let rows: Vec<_> = r.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    for row in &rows {
        for k in 5..7 {
            let u: f64 = row[k].parse().unwrap();
            assert!((-2.5..=2.5).contains(&u));
        }
    }

    let mut r = csv::Reader::from_path(&subdomains).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["id", "parent", "case", "x1_lb", "x1_ub", "x2_lb", "x2_ub", "bound"]
    );
    let mut area = 0.0;
    let mut a_rows = 0;
    for row in r.records() {
        let row = row.unwrap();
        let f = |k: usize| row[k].parse::<f64>().unwrap();
        area += (f(4) - f(3)) * (f(6) - f(5));
        assert!(["A", "B"].contains(&&row[2]));
        a_rows += usize::from(&row[2] == "A");
    }
    assert!((area - 16.0).abs() < 1e-9, "area {area}");
    assert_eq!(a_rows, rows.len());
}

#[test]
fn echoed_config_reproduces_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "disk.json", &disk());
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let o = run(&[
        "verify",
        problem.to_str().unwrap(),
        "--deterministic",
        "--eps-f",
        "1e-5",
        "--select",
        "depth-first",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&[
        "verify",
        problem.to_str().unwrap(),
        "--config",
        first.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (a, b) = (read_json(&first), read_json(&second));
    assert_eq!(a["verdict"], b["verdict"]);
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["stats"]["iterations"], b["stats"]["iterations"]);
    assert_eq!(a["config"]["eps_f"], 1e-5);
}

#[test]
fn steep_gamma_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = disk();
    body["gamma"] = serde_json::json!({"linear": 1.5});
    let problem = write_problem(dir.path(), "steep.json", &body);
    let o = run(&["verify", problem.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(65));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma(r) <= r"), "{err}");
}

#[test]
fn input_errors_name_their_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"n\": 2,\n  \"m\": ,\n}").unwrap();
    let o = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let mut body = disk();
    body["X"]["lower"] = serde_json::json!([-1.5]);
    let problem = write_problem(dir.path(), "short.json", &body);
    let o = run(&["verify", problem.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`X.lower`"));

    let mut body = disk();
    body["h"] = serde_json::json!("1 - x3^2");
    let problem = write_problem(dir.path(), "unknown_var.json", &body);
    let o = run(&["verify", problem.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`h`"));

    let o = run(&["verify", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(66));
    let o = run(&["verify", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn discretize_prints_case_study_matrices() {
    let o = run(&["discretize", case_study().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("f1 = "));
    for v in [
        "17.63", "7.335", "22.00", "10.29", "5.375", "1.959", "5.879", "3.416",
    ] {
        assert!(text.contains(v), "{v} missing from {text}");
    }
    let o = run(&[
        "discretize",
        write_problem(tempfile::tempdir().unwrap().path(), "d.json", &disk())
            .to_str()
            .unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(65));
}

#[test]
fn baseline_lands_outside_the_safe_set() {
    let o = run(&["baseline", case_study().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = v["point"].as_array().unwrap();
    assert!((p[0].as_f64().unwrap() - 0.841).abs() < 5e-3);
    assert!((p[1].as_f64().unwrap() + 1.457).abs() < 5e-3);
    assert!(v["barrier"].as_f64().unwrap() < 0.0);
    assert!(v["note"].as_str().unwrap().contains("outside the safe set"));
}

#[test]
fn baseline_matches_hand_solution_on_convex_toy() {
    // F(x) = 0.5 + 0.25 x^2 on [-1, 1], minimum 0.5 at 0
    let body = serde_json::json!({
        "n": 1, "m": 1,
        "f": ["0.5*x1 + u1"],
        "h": "1 - x1^2",
        "gamma": {"linear": 0.5},
        "pi": ["0"],
        "U": {"lower": [-1], "upper": [1]},
        "X": {"lower": [-2], "upper": [2]}
    });
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "toy.json", &body);
    let o = run(&["baseline", problem.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["point"][0].as_f64().unwrap().abs() < 1e-3);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(v.get("note").is_none());
}

#[test]
fn trace_log_reports_subdomains() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), "disk.json", &disk());
    let o = bin()
        .env("DTCBF_LOG", "trace")
        .args(["verify", problem.to_str().unwrap(), "--out"])
        .arg(dir.path().join("v.json"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("subdomain 1 case"));
    assert!(err.contains("valid:"));
    let o = run(&[
        "verify",
        problem.to_str().unwrap(),
        "--out",
        dir.path().join("w.json").to_str().unwrap(),
    ]);
    assert!(o.stderr.is_empty());
}
