use std::process::{Command, Output};

use epdkit::image::ImageBuf;

fn epdkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epdkit")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(epdkit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(epdkit(&["params", "--bogus"]).status.code(), Some(2));
    assert_eq!(epdkit(&["distort", "--kind", "not_a_kind", "--level", "1", "--in", "a", "--out", "b"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_with_one_line() {
    let out = epdkit(&["split", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: "));

    let out = epdkit(&["params", "--variant", "Nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn params_prints_count() {
    let v = json(&epdkit(&["params", "--preset", "full"]));
    assert_eq!(v["params"].as_u64(), Some(48_854_950));
    let toy = json(&epdkit(&["params", "--preset", "toy", "--variant", "Baseline"]));
    assert!(toy["params"].as_u64().unwrap() < 48_854_950);
}

#[test]
fn distort_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    ImageBuf::filled(32, 32, [0.3, 0.6, 0.9]).write_png(&a).unwrap();
    let args = ["distort", "--in", a.to_str().unwrap(), "--kind", "gaussian_blur", "--level", "3", "--seed", "7", "--out", b.to_str().unwrap()];
    json(&epdkit(&args));
    let first = std::fs::read(&b).unwrap();
    assert_eq!(ImageBuf::read_png(&b).unwrap().height(), 32);
    json(&epdkit(&args));
    assert_eq!(std::fs::read(&b).unwrap(), first);
}

#[test]
fn generate_split_train_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let g = json(&epdkit(&["generate", "--scenes", "2", "--tasks", "push,pick", "--kinds", "darken,white_noise", "--seed", "4", "--out", d]));
    assert_eq!(g["records"].as_u64(), Some(40));
    let s = json(&epdkit(&["split", "--manifest", d, "--seed", "9"]));
    assert_eq!(s["val"].as_u64(), Some(8));

    let ck = dir.path().join("m.eiqa");
    let curve = dir.path().join("curve.csv");
    let t = json(&epdkit(&[
        "train", "--manifest", d, "--preset", "toy", "--input-size", "32", "--epochs", "1", "--batch-size", "8", "--out",
        ck.to_str().unwrap(), "--curve", curve.to_str().unwrap(),
    ]));
    assert_eq!(t["curve"].as_array().unwrap().len(), 1);
    assert!(std::fs::read_to_string(&curve).unwrap().starts_with("epoch,train_mse,val_mse\n"));

    let csv = dir.path().join("t1.csv");
    let e = json(&epdkit(&["eval", "--manifest", d, "--scorer", "checkpoint", "--checkpoint", ck.to_str().unwrap(), "--csv", csv.to_str().unwrap()]));
    assert_eq!(e["subsets"].as_array().unwrap().len(), 3);
    assert!(e["params"].as_u64().unwrap() > 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2);

    let missing = epdkit(&["eval", "--manifest", d, "--scorer", "checkpoint"]);
    assert_eq!(missing.status.code(), Some(1));
}
