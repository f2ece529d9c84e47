use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn riskdec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskdec"))
        .current_dir(dir)
        .env("RISKDEC_STORE", dir.join("store"))
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_task(dir: &Path) {
    fs::write(
        dir.join("task.json"),
        r#"{"synth": {"n_tr": 120, "n_te": 200, "out_dir": "data"}}"#,
    )
    .unwrap();
    let o = riskdec(dir, &["--config", "task.json", "--seed", "4", "synth", "gen"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

const DECOMPOSE: [&str; 8] = [
    "decompose",
    "--train",
    "data/raw_train.fvec",
    "--test",
    "data/raw_test.fvec",
    "--raw-train",
    "data/raw_train.fvec",
    "--lambda=0.01",
];

#[test]
fn decompose_prints_table_and_is_idempotent() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir);
    let first = riskdec(dir, &[&["--out", "a.json"], &DECOMPOSE[..]].concat());
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let table = String::from_utf8(first.stdout.clone()).unwrap();
    for row in ["approximation", "usability", "probe generalization", "encoder generalization"] {
        assert!(table.contains(row), "{table}");
    }
    let second = riskdec(dir, &[&["--out", "b.json"], &DECOMPOSE[..]].concat());
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(fs::read(dir.join("a.json")).unwrap(), fs::read(dir.join("b.json")).unwrap());
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("a.json")).unwrap()).unwrap();
    assert_eq!(doc["command"], "decompose");
    assert_eq!(doc["config"]["probe"]["lambda"], 0.01);
    assert_eq!(doc["result"]["components"]["usability"], 0.0);

    let forced = riskdec(dir, &[&["--force", "--out", "c.json"], &DECOMPOSE[..]].concat());
    assert_eq!(code(&forced), 0);
    assert_eq!(fs::read(dir.join("a.json")).unwrap(), fs::read(dir.join("c.json")).unwrap());
}

#[test]
fn decompose_needs_exactly_one_reference() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir);
    let none = riskdec(dir, &DECOMPOSE[..5]);
    assert_eq!(code(&none), 2);
    let both = riskdec(dir, &[&DECOMPOSE[..], &["--ref-risk", "0.0084"]].concat());
    assert_eq!(code(&both), 2);
    let external = riskdec(dir, &[&DECOMPOSE[..5], &["--ref-risk", "0.0084", "--lambda", "0.01"]].concat());
    assert_eq!(code(&external), 0);
    let out = String::from_utf8(external.stdout).unwrap();
    assert!(out.lines().next().unwrap().ends_with("0.0084"), "{out}");
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(code(&riskdec(dir, &["frobnicate"])), 2);
    assert_eq!(code(&riskdec(dir, &["report"])), 2);
    fs::write(dir.join("junk.fvec"), b"not a feature file").unwrap();
    let bad = riskdec(dir, &["stats", "--in", "junk.fvec"]);
    assert_eq!(code(&bad), 3, "{}", String::from_utf8_lossy(&bad.stderr));
    fs::write(dir.join("bad.json"), r#"{"stats": {"atoll": 1}}"#).unwrap();
    assert_eq!(code(&riskdec(dir, &["--config", "bad.json", "stats", "--in", "junk.fvec"])), 2);

    fs::write(dir.join("flat.csv"), "model,lr,total\na,1,0.2\nb,1,0.3\nc,1,0.25\n").unwrap();
    let flat = riskdec(dir, &["analyze", "--table", "flat.csv", "--method", "gla", "--hparam", "lr", "--metric", "total"]);
    assert_eq!(code(&flat), 4, "{}", String::from_utf8_lossy(&flat.stderr));
}

#[test]
fn fewshot_marks_infeasible_and_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir);
    let o = riskdec(
        dir,
        &[
            "--out", "fs.json", "fewshot", "--train", "data/raw_train.fvec", "--test", "data/raw_test.fvec",
            "--settings", "100%,30-shot,3-shot", "--seeds", "0,1", "--lambda", "0.01",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.join("fs.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("setting,"));
    assert_eq!(lines.count(), 3);
    assert!(String::from_utf8(o.stdout).unwrap().contains("30-shot   infeasible"));

    let zero = riskdec(dir, &["fewshot", "--train", "data/raw_train.fvec", "--test", "data/raw_test.fvec", "--settings", "0-shot"]);
    assert_eq!(code(&zero), 2);
}

#[test]
fn sweep_and_report_bundle() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_task(dir);
    fs::write(
        dir.join("encoders.json"),
        r#"[{"kind": "constant"}, {"kind": "identity"}, {"kind": "random_projection", "d_out": 4}]"#,
    )
    .unwrap();
    fs::write(
        dir.join("small.json"),
        serde_json::json!({"sweep": {"seeds": [0], "probe": {"lambda": 0.01}}}).to_string(),
    )
    .unwrap();
    let task = serde_json::json!({
        "n_classes": 3, "d_raw": 3, "sigma": 1.0, "n_pre": 0, "n_tr": 90, "n_te": 90, "seed": 0,
        "means": [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
    });
    fs::write(dir.join("task3.json"), task.to_string()).unwrap();
    let o = riskdec(
        dir,
        &["--config", "small.json", "--out", "sweep.json", "synth", "sweep", "--encoders", "encoders.json", "--task", "task3.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let frontier = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(frontier.starts_with("encoder,usability,probe_gen,"));
    assert_eq!(frontier.lines().count(), 4);

    for m in ["m1", "m2"] {
        let o = riskdec(dir, &[&DECOMPOSE[..], &["--encoder", m, "--sub-size", if m == "m1" { "20" } else { "40" }]].concat());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = riskdec(dir, &["report", "--out-dir", "rep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let comps = fs::read_to_string(dir.join("rep/components.csv")).unwrap();
    assert_eq!(comps.lines().count(), 3);
    assert!(dir.join("rep/radar.json").exists());
    assert!(dir.join("rep/scaling_observations.json").exists());
    assert_eq!(fs::read_to_string(dir.join("rep/frontier.csv")).unwrap().lines().count(), 6);
}
