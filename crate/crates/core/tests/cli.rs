use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn lpproj(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_lpproj"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn run(request: &str) -> (i32, Value) {
    let out = lpproj(&["run"], request);
    let json = serde_json::from_slice(&out.stdout).unwrap();
    (out.status.code().unwrap(), json)
}

fn coords(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect()
}

fn close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (a, b) in got.iter().zip(want) {
        assert!((a - b).abs() <= tol, "{got:?} vs {want:?}");
    }
}

#[test]
fn project_full_ball() {
    let (code, r) = run(
        r#"{"command":"project","p":2,"x":[3,4],"set":{"kind":"full_ball","r":1},"flavor":"generalized"}"#,
    );
    assert_eq!(code, 0);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["region"], "outside");
    close(&coords(&r["result"]), &[0.6, 0.8], 1e-15);
}

#[test]
fn compare_masked_ball_witness() {
    let (code, r) =
        run(r#"{"command":"compare","p":3,"x":[1.2,10],"set":{"kind":"masked_ball","mask":[0],"r":1}}"#);
    assert_eq!(code, 0);
    let pr = &r["comparison"]["projection"];
    close(&coords(&pr["generalized"]["result"]), &[0.143917, 0.0], 1e-6);
    close(&coords(&pr["metric"]["result"]), &[1.0, 0.0], 1e-15);
    assert!((pr["discrepancy"].as_f64().unwrap() - 0.856083).abs() < 1e-6);
}

#[test]
fn derivative_metric_cylinder() {
    let (code, r) = run(
        r#"{"command":"derivative","p":2,"x":[2,2,3],"v":[1,0,5],"set":{"kind":"cylinder","mask":[0,1],"r":1},"flavor":"metric"}"#,
    );
    assert_eq!(code, 0);
    assert_eq!(r["method"], "closed_form");
    let s = 0.125f64.sqrt() / 2.0;
    close(&coords(&r["result"]), &[s, -s, 5.0], 1e-12);
}

#[test]
fn input_file_and_pretty_output() {
    let dir = std::env::temp_dir().join(format!("lpproj-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("req.json");
    std::fs::write(
        &path,
        r#"{"command":"project","p":3,"x":[0.5,4],"set":{"kind":"subspace","mask":[0]},"flavor":"metric"}"#,
    )
    .unwrap();
    let out = lpproj(&["run", "--input", path.to_str().unwrap(), "--pretty"], "");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\n  \"status\": \"ok\""));
    let r: Value = serde_json::from_str(&text).unwrap();
    close(&coords(&r["result"]), &[0.5, 0.0], 0.0);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn schema_errors_exit_2() {
    let (code, r) = run(r#"{"command":"project","p":2}"#);
    assert_eq!(code, 2);
    assert_eq!(r["error"]["code"], "SchemaError");
    let out = lpproj(&["run", "--input", "/nonexistent/req.json"], "");
    assert_eq!(out.status.code(), Some(2));
    let out = lpproj(&["frobnicate"], "");
    assert_eq!(out.status.code(), Some(2));
    let out = lpproj(&["suite", "nope"], "");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn computation_errors_exit_1() {
    let (code, r) = run(
        r#"{"command":"derivative","p":1.5,"x":[0,1],"v":[1,0],"set":{"kind":"masked_ball","mask":[0],"r":1}}"#,
    );
    assert_eq!(code, 1);
    assert_eq!(r["error"]["code"], "Nondifferentiable");
}

#[test]
fn verify_tolerance_override() {
    let req = r#"{"command":"verify","p":2.5,"x":[0.7,-0.4,2],"set":{"kind":"masked_ball","mask":[0,1],"r":0.5},"flavor":"metric"}"#;
    assert_eq!(lpproj(&["run"], req).status.code(), Some(0));
    let out = lpproj(&["run", "--tol-override", "1e-300"], req);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seeded_runs_are_identical() {
    let req = r#"{"command":"project","p":3,"x":[5,0.1,2],"set":{"kind":"cylinder","mask":[0],"r":1}}"#;
    let a = lpproj(&["run", "--seed", "9"], req);
    let b = lpproj(&["run", "--seed", "9"], req);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(r["status"], "fallback");
}

#[test]
fn oracle_equivalence_suite_passes_with_seed_42() {
    let out = lpproj(&["suite", "oracle_equivalence", "--seed", "42"], "");
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    for c in r["suite"]["checks"].as_array().unwrap() {
        assert_eq!(c["passed"], c["instances"], "{}", c["name"]);
    }
}
