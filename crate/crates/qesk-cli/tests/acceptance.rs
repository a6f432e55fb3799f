//! Acceptance criterion 9: reproducibility of the command-line runs.
//! Identical configuration and seed must give byte-identical reports, and
//! the Gram matrix file must not depend on the worker count.

use std::path::PathBuf;
use std::process::Command;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_qesk"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_9_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir();
    let data = data.to_str().unwrap();

    // identical evaluate runs -> identical report bytes
    let report_a = tmp.path().join("a.report");
    let report_b = tmp.path().join("b.report");
    for (path, workers) in [(&report_a, "1"), (&report_b, "4")] {
        run(&[
            "evaluate",
            "--dataset-dir",
            data,
            "--dataset",
            "MUTAG",
            "--kind",
            "qesk",
            "--repetitions",
            "2",
            "--seed",
            "42",
            "--workers",
            workers,
            "-o",
            path.to_str().unwrap(),
        ]);
    }
    let bytes_a = std::fs::read(&report_a).unwrap();
    let bytes_b = std::fs::read(&report_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "reports differ across runs/worker counts");

    // gram files across worker counts -> identical bytes
    let gram_1 = tmp.path().join("w1.gram");
    let gram_4 = tmp.path().join("w4.gram");
    for (path, workers) in [(&gram_1, "1"), (&gram_4, "4")] {
        run(&[
            "kernel",
            "--dataset-dir",
            data,
            "--dataset",
            "MUTAG",
            "--kind",
            "qesk",
            "--workers",
            workers,
            "-o",
            path.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        std::fs::read(&gram_1).unwrap(),
        std::fs::read(&gram_4).unwrap(),
        "gram files differ across worker counts"
    );
    println!("criterion 9 (determinism): pass");
}
