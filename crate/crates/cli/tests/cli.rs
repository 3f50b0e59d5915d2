use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cirl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cirl")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_prints_the_value_and_writes_a_policy() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("vi.json");
    let out = cirl(&["solve", "--game", "chefworld-2x3", "--solver", "vi", "--out", path(&policy)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let value: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((value - 0.9025).abs() < 1e-12);
    assert!(policy.exists());

    let out = cirl(&["--format", "json", "eval", "--game", "chefworld-2x3", "--policy", path(&policy), "--episodes", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["success_rate"], 1.0);
    assert_eq!(v["exact_success"], 1.0);

    let out = cirl(&["validate", path(&policy)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid policy"));
}

#[test]
fn pbvi_and_pomcp_solvers_run() {
    let out = cirl(&["--format", "json", "solve", "--game", "chefworld-2x3", "--solver", "pbvi", "--rounds", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((stdout_json(&out)["value"].as_f64().unwrap() - 0.9025).abs() < 1e-9);
    let out = cirl(&["--format", "json", "solve", "--game", "chefworld-2x2", "--solver", "pomcp", "--simulations", "500"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["solver"], "pomcp");
}

#[test]
fn irl_pipeline_scores_below_cirl() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("irl.json");
    let out = cirl(&["--format", "json", "irl", "--game", "chefworld-2x3", "--out", path(&policy)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_json(&out)["value"].as_f64().unwrap() < 0.9025);
    let out = cirl(&[
        "--format", "json", "eval", "--game", "chefworld-2x3", "--policy", path(&policy), "--human", "demonstrator", "--episodes", "100",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_json(&out)["exact_success"].as_f64().unwrap() < 1.0);
}

#[test]
fn resource_caps_exit_with_3() {
    let out = cirl(&["--format", "json", "solve", "--game", "chefworld-4x2", "--solver", "vi-baseline"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["exit_code"], 3);
}

#[test]
fn bad_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\": 1").unwrap();
    assert_eq!(cirl(&["validate", path(&bad)]).status.code(), Some(2));
    assert_eq!(cirl(&["solve", "--game", "chefworld-9x9", "--solver", "vi"]).status.code(), Some(2));
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, r#"{"suite": "irl", "games": []}"#).unwrap();
    assert_eq!(cirl(&["bench", "--config", path(&cfg)]).status.code(), Some(2));
    assert_eq!(cirl(&["validate", path(&cfg)]).status.code(), Some(2));

    // a policy for another game
    let policy = dir.path().join("p.json");
    assert_eq!(cirl(&["solve", "--game", "chefworld-2x2", "--solver", "vi", "--out", path(&policy)]).status.code(), Some(0));
    assert_eq!(cirl(&["eval", "--game", "chefworld-2x3", "--policy", path(&policy)]).status.code(), Some(2));
    // clap usage errors also exit with 2
    assert_eq!(cirl(&["solve", "--solver", "vi"]).status.code(), Some(2));
}

#[test]
fn bench_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("irl.json");
    std::fs::write(&cfg, r#"{"suite": "irl", "games": ["chefworld-2x3"]}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = cirl(&["bench", "--config", path(&cfg), "--output-dir", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["irl.csv", "irl.json", "irl_plot.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("suite,game,solver"));
    assert_eq!(cirl(&["validate", path(&cfg)]).status.code(), Some(0));
}

#[test]
fn game_specs_validate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("g.json");
    std::fs::write(&spec, cirl_core::domains::preset("chefworld-3x2").unwrap().to_json()).unwrap();
    let out = cirl(&["validate", path(&spec)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid game"));
    let out = cirl(&["--format", "json", "solve", "--game", path(&spec), "--solver", "vi", "--human-model", "boltzmann:5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
