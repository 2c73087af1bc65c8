use std::process::{Command, Output};

use serde_json::Value;

fn dyncore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyncore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn leastcore_of_majority() {
    let out = dyncore(&["--spec", "majority3", "leastcore"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["epsilon_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    assert_eq!(v["core_empty"], Value::Bool(true));
}

#[test]
fn leastcore_csv() {
    let out = dyncore(&["--spec", "majority3", "--format", "csv", "leastcore"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "player,payoff,epsilon_star");
    assert_eq!(lines.len(), 4);
}

#[test]
fn faircore_check_runs() {
    let out = dyncore(&["--spec", "alternating_u1u2", "--eps", "0.5", "faircore", "check"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    json(&out);
}

#[test]
fn spec_from_file() {
    let dir = std::env::temp_dir().join(format!("dyncore-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.json");
    std::fs::write(&good, r#"{"n": 2, "worth": {"0": 0.2, "1": 0.3, "0,1": 1}}"#).unwrap();
    let out = dyncore(&["--spec", good.to_str().unwrap(), "leastcore"]);
    assert!(out.status.success());
    assert!(json(&out)["epsilon_star"].as_f64().unwrap() < 0.0);

    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"n": 2, "worth": {"0,1": "#).unwrap();
    let out = dyncore(&["--spec", bad.to_str().unwrap(), "leastcore"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_spec_name_fails() {
    let out = dyncore(&["--spec", "no_such_example", "leastcore"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reproduce_list() {
    let out = dyncore(&["reproduce", "--list"]);
    assert!(out.status.success());
    let names: Vec<String> = json(&out)
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"least-core".to_string()));
    assert_eq!(names.len(), 7);
}

#[test]
fn reproduce_single_example() {
    let out = dyncore(&["reproduce", "--only", "least-core"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("PASS least-core"));
}

#[test]
fn output_is_deterministic() {
    let args = ["--spec", "cyclic_splits", "--grid", "10", "faircore", "certificate"];
    let a = dyncore(&args);
    let b = dyncore(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
