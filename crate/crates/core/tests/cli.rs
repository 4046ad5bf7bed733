use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn ecr(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ecr"))
        .args(args)
        .env_remove("ECR_THREADS")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn report(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn strip_timings(mut v: Value) -> Value {
    v["timings_ms"] = Value::Null;
    v
}

#[test]
fn solve_m1_reports_small_residual() {
    let (code, out) = ecr(&["solve", "--matrix", "m1", "--k", "3", "--m", "8", "--seed", "1"]);
    assert_eq!(code, 0);
    let v = report(&out);
    assert!(v["residual_rel"].as_f64().unwrap() <= 1e-10);
    for key in ["config", "timings_ms", "bounds", "checks", "certified"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["bounds"]["C1"].is_null() && v["certified"].is_null());
    assert!(v["checks"]["main_identity"].is_null());
}

#[test]
fn verify_m2_passes_every_check() {
    let (code, out) = ecr(&["verify", "--matrix", "m2", "--k", "4", "--m", "8"]);
    assert_eq!(code, 0);
    let v = report(&out);
    for key in ["main_identity", "det_lemma", "appendix"] {
        assert_eq!(v["checks"][key]["pass"], Value::Bool(true), "{key}");
    }
    assert_eq!(v["checks"]["conditions"]["pass"], Value::Bool(true));
}

#[test]
fn zero_cache_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let z = dir.path().join("z.json");
    let x1 = dir.path().join("x1.json");
    let x2 = dir.path().join("x2.json");
    let p = |p: &Path| p.to_str().unwrap().to_owned();
    let (code, _) = ecr(&["build-zeros", "--matrix", "m1", "--k", "3", "--out", &p(&z)]);
    assert_eq!(code, 0);
    let (code, _) = ecr(&["solve", "--matrix", "m1", "--k", "3", "--seed", "4", "--out", &p(&x1)]);
    assert_eq!(code, 0);
    let (code, _) = ecr(&[
        "solve", "--matrix", "m1", "--k", "3", "--seed", "4", "--zeros", &p(&z), "--out", &p(&x2),
    ]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read(&x1).unwrap(), std::fs::read(&x2).unwrap());
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let base = ["solve", "--matrix", "m2", "--k", "4", "--m", "16", "--seed", "9", "--certify"];
    let (_, a) = ecr(&[&base[..], &["--threads", "1"]].concat());
    let (_, b) = ecr(&[&base[..], &["--threads", "3"]].concat());
    let (mut a, mut b) = (strip_timings(report(&a)), strip_timings(report(&b)));
    a["config"]["threads"] = Value::Null;
    b["config"]["threads"] = Value::Null;
    assert_eq!(a, b);
    assert_eq!(a["certified"], Value::Bool(true));
}

#[test]
fn certify_violation_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bfile = dir.path().join("b.json");
    std::fs::write(
        &bfile,
        r#"{"order": 3, "diag": [2.0, 2.0, 2.0], "sub": [-1.0, -1.0], "super": [-1.0, -1.0]}"#,
    )
    .unwrap();
    let (code, out) = ecr(&[
        "solve", "--matrix", "m1", "--k", "2", "--b-file", bfile.to_str().unwrap(), "--certify",
    ]);
    assert_eq!(code, 2);
    let v = report(&out);
    assert_eq!(v["checks"]["conditions"]["pass"], Value::Bool(false));
    assert!(v["residual_rel"].is_null());
}

#[test]
fn file_matrices_and_parse_errors() {
    let dir = tempfile::tempdir().unwrap();
    let rn = dir.path().join("rn.json");
    let b = dir.path().join("b.json");
    std::fs::write(
        &rn,
        r#"{"order": 3, "diag": [0.5, 0.5, 0.5], "sub": [-0.2, -0.2], "super": [-0.2, -0.2]}"#,
    )
    .unwrap();
    std::fs::write(&b, r#"{"order": 2, "diag": [0.5, 0.5], "sub": [-0.1], "super": [-0.1]}"#).unwrap();
    let (code, out) = ecr(&[
        "solve", "--matrix", "file", "--rn-file", rn.to_str().unwrap(), "--b-file", b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(report(&out)["config"]["n"], 3);

    std::fs::write(&b, "{\"order\": 2,\n \"diag\": [0.5, oops]}").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ecr"))
        .args(["solve", "--matrix", "file", "--rn-file", rn.to_str().unwrap(), "--b-file", b.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn bad_block_count_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let rn = dir.path().join("rn.json");
    std::fs::write(&rn, r#"{"order": 2, "diag": [0.5, 0.5], "sub": [-0.1], "super": [-0.1]}"#).unwrap();
    let (code, _) = ecr(&["solve", "--matrix", "m1", "--rn-file", rn.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn bench_reports_work() {
    let (code, out) = ecr(&["bench", "--matrix", "poisson", "--k", "4", "--m", "8", "--repeat", "2"]);
    assert_eq!(code, 0);
    let v = report(&out);
    assert!(v["bisection_work"].as_u64().unwrap() > 0);
    assert!(v["timings_ms"]["solve"].is_number());
}
