use std::path::Path;
use std::process::{Command, Output};

fn nccdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nccdet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nccdet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_data(dir: &Path) {
    ok(&[
        "datagen",
        "--out",
        s(dir),
        "--scenes",
        "2",
        "--frames-per-scene",
        "2",
        "--width",
        "64",
        "--height",
        "64",
        "--targets",
        "2",
        "--negatives",
        "30",
        "--seed",
        "5",
    ]);
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "datagen",
        "train",
        "export-filter",
        "fit-hat",
        "detect",
        "bench",
        "roc",
    ] {
        let text = ok(&[sub, "--help"]);
        assert!(text.contains("Usage:"), "{sub}: {text}");
    }
    assert!(ok(&["--help"]).contains("fit-hat"));
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    assert_eq!(nccdet(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(nccdet(&[]).status.code(), Some(2));
    let out = nccdet(&[
        "bench",
        "--data",
        "/nonexistent/frames",
        "--out-dir",
        "/tmp/unused",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn unknown_method_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let out = nccdet(&[
        "bench",
        "--data",
        s(dir.path()),
        "--methods",
        "hat-15,sobel",
        "--out-dir",
        s(&dir.path().join("b")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sobel"));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    small_data(&data);
    for f in ["dataset.nccd", "truths.csv", "frames/frame_0003.txt"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let net = d.join("net.txt");
    let log = ok(&[
        "train",
        "--data",
        s(&data.join("dataset.nccd")),
        "--epochs",
        "2",
        "--seed",
        "1",
        "--out",
        s(&net),
    ]);
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 2);

    let filter = d.join("f1.txt");
    ok(&[
        "export-filter",
        "--net",
        s(&net),
        "--index",
        "1",
        "--out",
        s(&filter),
    ]);
    assert_eq!(
        nccdet(&[
            "export-filter",
            "--net",
            s(&net),
            "--index",
            "2",
            "--out",
            s(&filter)
        ])
        .status
        .code(),
        Some(1)
    );

    let hat = d.join("hat.txt");
    ok(&["fit-hat", "--filter", s(&filter), "--out", s(&hat)]);
    assert!(std::fs::read_to_string(&hat)
        .unwrap()
        .contains("support_halfwidth="));

    let dets = d.join("dets.csv");
    ok(&[
        "detect",
        "--frame",
        s(&data.join("frames/frame_0000.txt")),
        "--method",
        "gauss-1.2",
        "--threshold",
        "0.5",
        "--out",
        s(&dets),
    ]);
    let dets = std::fs::read_to_string(&dets).unwrap();
    assert_eq!(dets.lines().next(), Some("row,col,score"));
    assert!(dets.lines().count() > 1);

    let bench = d.join("bench");
    let methods = format!(
        "hat-15,hat-7-fixed,gauss-1.2,mad-ratio,net:{},filter:{}",
        s(&net),
        s(&filter)
    );
    let auc = ok(&[
        "bench",
        "--data",
        s(&data),
        "--methods",
        &methods,
        "--hat",
        s(&hat),
        "--out-dir",
        s(&bench),
    ]);
    assert_eq!(auc.lines().count(), 7);
    assert!(auc.contains("net-net,") && auc.contains("filter-f1,"));

    let roc = d.join("roc");
    ok(&[
        "roc",
        "--scores",
        s(&bench.join("scores.csv")),
        "--data",
        s(&data),
        "--out-dir",
        s(&roc),
    ]);
    for f in ["roc.csv", "auc.csv"] {
        assert_eq!(
            std::fs::read(bench.join(f)).unwrap(),
            std::fs::read(roc.join(f)).unwrap(),
            "{f} rebuilt from scores"
        );
    }
}

#[test]
fn datagen_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_data(a.path());
    small_data(b.path());
    for f in ["dataset.nccd", "truths.csv", "frames/frame_0002.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}
