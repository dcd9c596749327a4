use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cwflow(dir: &Path, stem: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwflow"))
        .arg("--threads")
        .arg("1")
        .arg("--out")
        .arg(dir.join(stem))
        .args(args)
        .output()
        .expect("run cwflow")
}

fn results(dir: &Path, stem: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    v["results"].clone()
}

#[test]
fn symmetric_bad_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwflow(dir.path(), "bad", &["bad", "--beta", "1.25", "--beta-prime", "0", "--t", "0.45"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = results(dir.path(), "bad");
    assert_eq!(r["bad"], serde_json::json!([0.0]));
    assert_eq!(r["label"], "non_gibbs_symmetric");
    let csv = std::fs::read_to_string(dir.path().join("bad.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "m,m0_a,m0_b,gap,jump");
    assert_eq!(lines.count(), 1);
}

#[test]
fn kernel_value_at_continuity_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwflow(dir.path(), "g", &["gamma", "--beta", "1.25", "--beta-prime", "0", "--t", "1", "--m-prime", "0.2"]);
    assert!(out.status.success());
    let r = results(dir.path(), "g");
    let (g, m0) = (r["gamma_plus"].as_f64().unwrap(), r["m0_star"].as_f64().unwrap());
    assert!(g > 0.5 && g < 1.0);
    let expect = 0.5 * (1.0 + (1.25 * m0).tanh() * (-2.0f64).exp());
    assert!((g - expect).abs() < 1e-9);
}

#[test]
fn lagrangian_vanishes_at_rest_at_the_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwflow(dir.path(), "l", &["lagrangian", "--beta-prime", "0.7", "--m", "0", "--v", "0"]);
    assert!(out.status.success());
    let r = results(dir.path(), "l");
    assert_eq!(r["j"].as_f64().unwrap(), 0.0);
}

#[test]
fn replay_from_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["cost", "--beta", "1.25", "--beta-prime", "0", "--t", "1", "--m-prime", "0.2", "--grid", "41"];
    assert!(cwflow(dir.path(), "a", &args).status.success());
    let cfg = dir.path().join("a.json");
    assert!(cwflow(dir.path(), "b", &["--config", cfg.to_str().unwrap()]).status.success());
    for ext in ["csv", "json"] {
        let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let usage = cwflow(dir.path(), "u", &["bad", "--beta", "1.25", "--beta-prime", "0", "--t", "1", "--rtol", "2"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("--rtol"));
    let none = cwflow(dir.path(), "n", &[]);
    assert_eq!(none.status.code(), Some(2));
    let negative = cwflow(dir.path(), "n", &["trajectory", "--beta", "-1", "--beta-prime", "0", "--t", "1", "--m0", "0.1"]);
    assert_eq!(negative.status.code(), Some(2));
    let starved = cwflow(
        dir.path(),
        "s",
        &["mc", "--beta", "1.25", "--beta-prime", "0", "--t", "1", "--m-prime", "0.9", "--replicas", "300"],
    );
    assert_eq!(starved.status.code(), Some(4));
}

#[test]
fn thread_count_does_not_change_paths() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mc", "--mode", "path", "--beta", "1.3", "--beta-prime", "0.5", "--t", "1", "--replicas", "8", "--n", "300"];
    let run = |threads: &str, stem: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_cwflow"))
            .args(["--threads", threads, "--out"])
            .arg(dir.path().join(stem))
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.path().join(format!("{stem}.csv"))).unwrap()
    };
    assert_eq!(run("1", "one"), run("3", "three"));
}
