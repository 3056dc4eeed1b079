use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    root.to_string_lossy().into_owned()
}

fn oqrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqrw"))
        .args(args)
        .env_remove("OQRW_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oqrw-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn validate_reports_classical_chain() {
    let v = json(&oqrw(&["validate", "--model", &model("classical-4site.json")]));
    assert_eq!(v["kind"], "qtm");
    assert_eq!(v["sites"], 4);
    assert_eq!(v["unital"], false);
}

#[test]
fn validate_names_bad_column() {
    let dir = scratch("bad");
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"n_sites": 2, "internal_dim": 1, "blocks": {"1->1": [[0.5]], "2->2": [[1]]}}"#).unwrap();
    let out = oqrw(&["validate", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("column") && err.contains('1'), "{err}");
}

#[test]
fn every_shipped_model_parses() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.contains("pair") || name.contains("birth") {
            continue;
        }
        let out = oqrw(&["validate", "--model", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn emitted_model_round_trips() {
    let v = json(&oqrw(&["validate", "--model", &model("circulant-pauli.json"), "--emit"]));
    let dir = scratch("emit");
    let path = dir.join("emitted.json");
    std::fs::write(&path, v["model"].to_string()).unwrap();
    let back = json(&oqrw(&["rep", "--model", path.to_str().unwrap()]));
    let orig = json(&oqrw(&["rep", "--model", &model("circulant-pauli.json")]));
    assert_eq!(back["matrix"], orig["matrix"]);
}

#[test]
fn circulant_is_ergodic_with_two_thirds() {
    let v = json(&oqrw(&["ergodicity", "--model", &model("circulant-pauli.json")]));
    assert_eq!(v["report"]["decision"], "ergodic");
    let s2 = v["report"]["sigma2"][0].as_f64().unwrap();
    assert!((s2 - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn shear_is_not_ergodic() {
    let v = json(&oqrw(&["ergodicity", "--model", &model("shear.json")]));
    assert_eq!(v["report"]["decision"], "not_ergodic");
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate",
        "--model",
        &model("split-mode-walk.json"),
        "--start",
        "0",
        "--targets",
        "2",
        "--horizon",
        "8",
        "--count",
        "3000",
        "--seed",
        "7",
    ];
    let a = oqrw(&args);
    let b = oqrw(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    assert_eq!(oqrw(&seq).stdout, a.stdout);
}

#[test]
fn classical_absorption_is_one_third() {
    let out = oqrw(&["hit", "--model", &model("classical-4site.json"), "--targets", "4", "--output", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("2,")).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-10);
}

#[test]
fn sqrt3_walk_probability() {
    let v = json(&oqrw(&[
        "walk-prob",
        "--pair",
        &model("sqrt3-pair.json"),
        "--time",
        "6",
        "--density",
        "[[0.3333333333333333, 0], [0, 0.6666666666666667]]",
    ]));
    let row = v["rows"].as_array().unwrap().iter().find(|r| r["site"] == 2).unwrap();
    assert!((row["probability"].as_f64().unwrap() - 2175.0 / 8192.0).abs() < 1e-12);
    assert!((v["total"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn potential_gives_expected_duration() {
    let v = json(&oqrw(&[
        "potential",
        "--model",
        &model("classical-gambler-window.json"),
        "--interior",
        "1..11",
        "--boundary",
        "0,12",
        "--cost",
        "1",
        "--boundary-values",
        "0",
    ]));
    // expected duration of the p = 0.4 ruin game on {0, …, 12}
    let (p, q, w) = (0.4f64, 0.6f64, 12.0f64);
    let r = q / p;
    for row in v["rows"].as_array().unwrap() {
        let i = row["site"].as_i64().unwrap() as f64;
        let want = i / (q - p) - w / (q - p) * (1.0 - r.powf(i)) / (1.0 - r.powf(w));
        assert!((row["value"].as_f64().unwrap() - want).abs() < 1e-8, "site {i}");
    }
    assert_eq!(v["uniqueness"]["verified"], true);
}

#[test]
fn output_dir_from_environment() {
    let dir = scratch("out");
    let out = Command::new(env!("CARGO_BIN_EXE_oqrw"))
        .args(["gambler", "--pair", &model("gambler-pair.json"), "--start", "2", "--output", "csv"])
        .env("OQRW_OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.join("gambler.csv")).unwrap();
    assert!(text.starts_with("mode,weight,lambda,mu,probability\n"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(oqrw(&["hit", "--model", &model("classical-4site.json")]).status.code(), Some(2));
    assert_eq!(
        oqrw(&["hit", "--model", &model("classical-4site.json"), "--targets", "1;4"]).status.code(),
        Some(2)
    );
    assert_eq!(oqrw(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let out = oqrw(&["hit", "--model", &model("classical-4site.json"), "--targets", "9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = oqrw(&["gambler", "--pair", &model("gambler-pair.json"), "--start", "1", "--density", "[[2, 0], [0, 0]]"]);
    assert_eq!(out.status.code(), Some(1));
}
