//! Exit codes and output files of the command-line tool.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynpricing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dynpricing-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn bundled_commands_succeed() {
    for args in [
        ["check", "example1_small"],
        ["monopoly", "multi_ar1"],
        ["relax", "example1_small"],
        ["commit", "example1_small"],
        ["equilibrium", "ar1_small"],
        ["enumerate", "example3_negative"],
        ["multi", "multi_ar1"],
    ] {
        let out = run(&["--grid", "31", args[0], args[1]]);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        json(&out);
    }
}

#[test]
fn oracle_matches_commitment_command() {
    let commit = json(&run(&["commit", "example1_small"]));
    let oracle = json(&run(&["oracle", "example1_small", "commitment"]));
    let a = commit["commitment"]["revenue"].as_f64().unwrap();
    let b = oracle["value"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
}

#[test]
fn validation_errors_exit_three() {
    let bad = scratch("no_delta.json");
    std::fs::write(&bad, r#"{"model": "two_period", "prior": {"kind": "uniform", "lo": 1, "hi": 2}}"#).unwrap();
    let out = run(&["relax", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
    assert_eq!(run(&["relax", "/nonexistent/scenario.json"]).status.code(), Some(3));
    assert_eq!(run(&["reproduce", "ex9"]).status.code(), Some(3));
    assert_eq!(run(&["oracle", "example1_small", "nonsense"]).status.code(), Some(3));
}

#[test]
fn reproduce_writes_report() {
    let out_path = scratch("ex3.json");
    let out = run(&["--out", out_path.to_str().unwrap(), "reproduce", "ex3-negative"]);
    assert_eq!(out.status.code(), Some(0));
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(written["passed"], true);
    assert_eq!(written, json(&out));
}

#[test]
fn sweep_csv_is_independent_of_thread_count() {
    let csv = |threads: &str, name: &str| {
        let path = scratch(name);
        let out = run(&[
            "--threads", threads, "--csv", path.to_str().unwrap(), "--grid", "41",
            "sweep", "ar1_small", "fig1.sweep",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let one = csv("1", "one.csv");
    assert_eq!(one, csv("4", "four.csv"));
    assert!(one.starts_with("param,p_star,p_A_commit,p_R_commit,"));
    assert_eq!(one.lines().count(), 10);
}
