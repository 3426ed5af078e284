use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn twosel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twosel"))
        .args(args)
        .output()
        .expect("run twosel")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn descent_base_and_masked() {
    let v = json(&twosel(&["descent", "--curve=-1,0,1"]));
    assert_eq!(v["dim"], 2);
    assert_eq!(v["curve"], "-1,0,1");
    assert_eq!(v["sigma_prime"], serde_json::json!(["inf", "2"]));
    assert_eq!(v["basis"].as_array().unwrap().len(), 2);

    let v = json(&twosel(&["descent", "--curve=-1,0,1", "--mask=inf=sign"]));
    assert_eq!(v["dim"], 1);
    assert_eq!(v["masks"]["inf"], "-1");

    let v = json(&twosel(&["descent", "--curve", "-1,0,1", "--mask=2=1"]));
    assert_eq!(v["dim"], 2);
}

#[test]
fn descent_twist_and_long_model() {
    let v = json(&twosel(&["descent", "--curve=-1,0,1", "--twist=17"]));
    assert_eq!(v["dim"], 4);
    assert_eq!(v["twist"], "17");
    let v = json(&twosel(&["descent", "--curve=[0,0,0,-1,0]"]));
    assert_eq!(v["dim"], 2);
}

#[test]
fn descent_rejects_bad_input() {
    let out = twosel(&["descent", "--curve=[1,-128,0,-48,-4]"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not full 2-torsion (dim E(Q)[2] = 1)"), "{err}");

    assert_eq!(twosel(&["descent", "--curve=1,1,2"]).status.code(), Some(1));
    assert_eq!(twosel(&["descent", "--curve=-1,0,1", "--twist=12"]).status.code(), Some(1));
    assert_eq!(twosel(&["descent", "--curve=-1,0,1", "--mask=3=sign"]).status.code(), Some(1));
    assert_eq!(twosel(&["descent", "--curve=-1,0,1", "--mask=4=1"]).status.code(), Some(1));
    assert_eq!(
        twosel(&["descent", "--curve=-1,0,1", "--mask=inf=sign", "--strict=inf"]).status.code(),
        Some(1)
    );
}

#[test]
fn strict_and_relaxed_flags() {
    let strict = json(&twosel(&["descent", "--curve=-1,0,1", "--strict=5"]));
    let relaxed = json(&twosel(&["descent", "--curve=-1,0,1", "--relaxed=5"]));
    let gap = relaxed["dim"].as_u64().unwrap() - strict["dim"].as_u64().unwrap();
    assert_eq!(gap, 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(twosel(&["scan", "--curve=-1,0,1", "--bound=0", "--out=/nonexistent"]).status.code(), Some(1));
    assert_eq!(twosel(&["verify", "nosuch"]).status.code(), Some(1));
    assert_eq!(twosel(&[]).status.code(), Some(1));
}

#[test]
fn verify_exit_codes() {
    let out = twosel(&["verify", "parity", "--curve=-1,0,1", "--trials=30", "--seed=1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().next(), Some("parity: 30/30 passed"));

    let out = twosel(&["verify", "parity", "--trials=40", "--seed=1", "--convention=scaled"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("counterexample"));
}

#[test]
fn search_budget_exhaustion_exits_three() {
    let out = twosel(&["search", "inc2", "--curve=-1,0,1", "--budget=0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("last candidate"));
}

#[test]
fn search_rejects_partial_torsion() {
    let out = twosel(&["search", "inc2", "--curve=[1,-128,0,-48,-4]"]);
    assert_eq!(out.status.code(), Some(1));
}

fn scan(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["scan", "--curve=-1,0,1", "--bound=600", "--block=100", "--out", out];
    args.extend_from_slice(extra);
    twosel(&args)
}

#[test]
fn scan_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(scan(a.path(), &[]).status.success());
    assert!(scan(b.path(), &["--jobs=1"]).status.success());
    for f in ["records.jsonl", "summary.json", "checkpoint.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let first = fs::read_to_string(a.path().join("records.jsonl")).unwrap();
    let lines: Vec<&str> = first.lines().collect();
    assert!(lines[0].starts_with(r#"{"d":1,"#));
    assert!(lines[1].starts_with(r#"{"d":-1,"#));
    assert!(!first.contains("\"ms\""));
}

#[test]
fn scan_resume_recovers_interrupted_block() {
    let clean = tempfile::tempdir().unwrap();
    assert!(scan(clean.path(), &[]).status.success());

    let crashed = tempfile::tempdir().unwrap();
    assert!(scan(crashed.path(), &[]).status.success());
    // roll the checkpoint back to |d| = 300 and leave a torn record behind
    let ck_path = crashed.path().join("checkpoint.json");
    let mut ck: Value = serde_json::from_str(&fs::read_to_string(&ck_path).unwrap()).unwrap();
    ck["last_abs_d"] = 300.into();
    fs::write(&ck_path, serde_json::to_string_pretty(&ck).unwrap() + "\n").unwrap();
    let rec_path = crashed.path().join("records.jsonl");
    let records = fs::read_to_string(&rec_path).unwrap();
    let cut = records.find(r#"{"d":305,"#).unwrap();
    fs::write(&rec_path, format!("{}{{\"d\":30", &records[..cut])).unwrap();

    let out = scan(crashed.path(), &["--resume"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.jsonl", "summary.json", "checkpoint.json"] {
        assert_eq!(
            fs::read(clean.path().join(f)).unwrap(),
            fs::read(crashed.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn scan_resume_rejects_other_curve() {
    let dir = tempfile::tempdir().unwrap();
    assert!(scan(dir.path(), &[]).status.success());
    let out = twosel(&[
        "scan",
        "--curve=0,1,5",
        "--bound=10",
        "--out",
        dir.path().to_str().unwrap(),
        "--resume",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn timing_adds_ms_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = twosel(&["scan", "--curve=0,1,5", "--bound=20", "--timing", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let records = fs::read_to_string(dir.path().join("records.jsonl")).unwrap();
    assert!(records.lines().all(|l| l.contains("\"ms\":")));
}

#[test]
fn bound_reads_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(scan(dir.path(), &[]).status.success());
    let v = json(&twosel(&["bound", "--summary", dir.path().join("summary.json").to_str().unwrap()]));
    assert_eq!(v["n"], 2);
    assert_eq!(v["two_n"], 4);
    assert_eq!(v["t_hat"], 2);
    assert_eq!(v["t_hat_le_n"], true);
}
