mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn gridtab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridtab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn toy_args(cmd: &str, out: &Path) -> Vec<String> {
    vec![
        cmd.into(),
        "--schema".into(),
        s(&repo().join("configs/toy.toml")),
        "--train-csv".into(),
        s(&repo().join("data/toy/toy.csv")),
        "--out".into(),
        s(out),
    ]
}

fn with(mut base: Vec<String>, extra: &[&str]) -> Vec<String> {
    base.extend(extra.iter().map(|a| a.to_string()));
    base
}

fn run(args: &[String]) -> Output {
    gridtab(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

const FAST: [&str; 10] = ["--seed", "3", "--epochs", "1", "--timesteps", "20", "--channels", "4", "--rows", "50"];

#[test]
fn pipeline_writes_six_artifacts_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let args = with(toy_args("pipeline", &out), &FAST);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
    assert_eq!(listed.len(), 6);
    for f in ["synthetic.csv", "model.ckpt", "loss_log.csv", "layout.tsv", "audit.json", "audit.md"] {
        assert!(listed.contains(&f), "{f}");
        assert!(out.join(f).exists());
    }
    let csv = std::fs::read_to_string(out.join("synthetic.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,flag"));
    assert_eq!(csv.lines().count(), 51);

    assert_eq!(code(&run(&args)), 1);
    assert_eq!(code(&run(&with(args, &["--force"]))), 0);
}

#[test]
fn stages_run_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(&run(&toy_args("fit", out))), 0);
    assert!(out.join("codec.json").exists());
    assert_eq!(code(&run(&with(toy_args("layout", out), &["--layout", "clustered"]))), 0);
    assert!(std::fs::read_to_string(out.join("layout.tsv")).unwrap().contains("flag"));
    assert_eq!(code(&run(&with(toy_args("train", out), &FAST[..8]))), 1);
    let model = out.join("model");
    assert_eq!(code(&run(&with(toy_args("train", &model), &FAST[..8]))), 0);
    let o = gridtab(&["sample", "--out", &s(&model), "--rows", "7", "--dump"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(model.join("grids.txt")).unwrap().lines().count(), 7);
    assert_eq!(std::fs::read_to_string(model.join("synthetic.csv")).unwrap().lines().count(), 8);
    let audit = with(toy_args("audit", &out.join("audit")), &["--synth-csv", &s(&repo().join("data/toy/toy.csv"))]);
    assert_eq!(code(&run(&audit)), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("audit/audit.json")).unwrap()).unwrap();
    assert_eq!(report["fidelity"]["overall"].as_f64(), Some(1.0));
}

#[test]
fn adult_audit_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth.csv");
    adult_test().write_csv_path(&synth).unwrap();
    let adult = [
        "audit",
        "--schema",
        &s(&adult_schema_path()),
        "--train-csv",
        &s(&adult_test_path()),
        "--synth-csv",
        &s(&synth),
        "--no-header",
        "--no-disclosure",
        "--out",
        &s(&dir.path().join("report")),
    ];
    let o = gridtab(&adult);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report/audit.json")).unwrap()).unwrap();
    assert_eq!(r["fidelity"]["overall"].as_f64(), Some(1.0));
    assert_eq!(r["semantic"]["any_rate"], r["semantic_real"]["any_rate"]);
}

#[test]
fn gradcheck_exit_codes() {
    let ok = gridtab(&["gradcheck"]);
    assert_eq!(code(&ok), 0);
    let again = gridtab(&["gradcheck"]);
    assert_eq!(ok.stdout, again.stdout);
    let text = String::from_utf8_lossy(&ok.stdout);
    let err: f64 = text.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(err < 1e-3);
    assert_eq!(code(&gridtab(&["gradcheck", "--inject-fault"])), 3);
}

#[test]
fn usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gridtab(&["frobnicate"])), 1);
    assert_eq!(code(&gridtab(&["fit"])), 1);
    let unseeded: Vec<String> = toy_args("pipeline", &dir.path().join("u"));
    assert_eq!(code(&run(&unseeded)), 1);
    assert_eq!(code(&run(&with(toy_args("layout", dir.path()), &["--layout", "manual"]))), 1);
    let missing = with(toy_args("fit", &dir.path().join("m")), &[]);
    let missing: Vec<String> = missing.into_iter().map(|a| a.replace("toy.csv", "absent.csv")).collect();
    assert_eq!(code(&run(&missing)), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,flag\nnot-a-number,yes\n").unwrap();
    let mut args = toy_args("fit", &dir.path().join("b"));
    args[4] = s(&bad);
    assert_eq!(code(&run(&args)), 2);
    assert_eq!(code(&gridtab(&["sample", "--out", &s(&dir.path().join("empty"))])), 2);
}
