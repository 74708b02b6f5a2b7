use std::process::{Command, Output};

use bipartite_sandpile::bigraph::BipartiteGraph;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bipartite-sandpile")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn group_of_k23() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k23.json");
    std::fs::write(&path, BipartiteGraph::complete(2, 3).to_json_string()).unwrap();
    let out = run(&["group", "--edges", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["factors"], serde_json::json!(["2", "6"]));
    assert_eq!(v["order"], "12");
    assert_eq!(v["spanning_trees"], "12");
    assert_eq!(v["cyclic"], false);
}

#[test]
fn predict_reports_regime_and_law() {
    let out = run(&["predict", "--n", "40", "--alpha", "0.75", "--p", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["regime"], "supercritical");
    let total: f64 = v["distribution"]["pmf"].as_array().unwrap().iter().map(|e| e[1].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("run.json");
    let csv_path = dir.path().join("run.csv");
    let out = run(&[
        "simulate",
        "--kind",
        "m-corank",
        "--n",
        "20",
        "--alpha",
        "0.25",
        "--q",
        "0.5",
        "--p",
        "2",
        "--trials",
        "5",
        "--seed",
        "9",
        "--out",
        out_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(saved, json(&out));
    assert_eq!(saved["pipeline_consistent"], true);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().next(), Some("trial,seed,observation"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn invalid_config_exits_2() {
    let out = run(&["simulate", "--kind", "prank", "--n", "10", "--alpha", "0.5", "--p", "4", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["predict", "--n", "10", "--alpha", "1.5", "--p", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--kind", "balanced-scaling", "--n", "10", "--alpha", "0.5", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
