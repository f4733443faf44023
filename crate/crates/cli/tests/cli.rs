use std::path::Path;
use std::process::{Command, Output};

fn slide(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slide"))
        .args(args)
        .current_dir(dir)
        .env("SLIDE_THREADS", "1")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = slide(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn fem_info_reports_the_tuned_beam() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["fem", "info"]);
    assert!(text.contains("nodes: 21"), "{text}");
    assert!(text.contains("29.000"), "{text}");
}

#[test]
fn full_workflow_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--batch", "10", "--seed", "2", "--out", "data.slid", "--csv", "csv"]);
    assert_eq!(std::fs::read_dir(d.join("csv")).unwrap().count(), 10);
    let text = ok(d, &["slide-window", "--data", "data.slid", "--probe-batch", "6"]);
    assert!(text.starts_with("t_d = "), "{text}");
    let window: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("tdwindow.json")).unwrap()).unwrap();
    assert_eq!(window["per_sample"].as_array().unwrap().len(), 6);
    ok(d, &["arrange", "--data", "data.slid", "--td", "50", "--k", "0", "--sensors", "2", "--out", "ds.sldx"]);
    ok(d, &["train", "--data", "ds.sldx", "--arch", "L", "--units", "td", "--seed", "1", "--max-epochs", "3", "--out", "net.snet"]);
    let history = std::fs::read_to_string(d.join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,train_mse,val_mse"));
    assert_eq!(history.lines().count(), 4);
    ok(d, &["eval", "--model", "net.snet", "--seed", "1", "--out", "eval"]);
    let rows = std::fs::read_to_string(d.join("eval/eval.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2000 - 50);
    assert!(d.join("eval/eval.svg").exists() && d.join("eval/metrics.json").exists());
    ok(d, &["bench", "--model", "net.snet", "--batches", "5,6", "--out", "bench.csv"]);
    let bench = std::fs::read_to_string(d.join("bench.csv")).unwrap();
    assert_eq!(bench.lines().count(), 3);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(slide(d, &["eval", "--model", "missing.snet", "--out", "e"]).status.code(), Some(2));
    assert_eq!(slide(d, &["gen", "--batch", "0", "--out", "x.slid"]).status.code(), Some(2));
    std::fs::write(d.join("bad.toml"), "[fem]\nn_elements = 0\n").unwrap();
    assert_eq!(slide(d, &["--config", "bad.toml", "fem", "info"]).status.code(), Some(2));
    assert_eq!(slide(d, &["train"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--batch", "5", "--seed", "4", "--out", "data.slid"]);
    ok(d, &["arrange", "--data", "data.slid", "--td", "50", "--out", "ds.sldx"]);
    let out = slide(d, &["train", "--data", "ds.sldx", "--arch", "L", "--lr", "1e30", "--out", "net.snet"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
