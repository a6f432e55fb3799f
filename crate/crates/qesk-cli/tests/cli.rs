//! End-to-end tests of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qesk::graphio::{write_tu_dataset, DatasetBundle, Graph};
use qesk::kernel::{load_gram_file, KernelKind};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn qesk_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qesk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Comma-separated float row `offset` lines after the `section` marker.
fn parse_matrix_row(dump: &str, section: &str, offset: usize) -> Vec<f64> {
    let lines: Vec<&str> = dump.lines().collect();
    let start = lines.iter().position(|&l| l == section).expect(section);
    lines[start + 1 + offset]
        .split(',')
        .map(|s| s.trim().parse().unwrap())
        .collect()
}

/// Synthetic two-class dataset: `per_class` triangles and `per_class`
/// 3-paths, trivially separable by any of the kernels.
fn write_synthetic(dir: &Path, per_class: usize) -> DatasetBundle {
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_class {
        graphs.push(Graph::new(3, [(0, 1), (1, 2), (0, 2)], Some(vec![1, 1, 1])).unwrap());
        labels.push(1);
    }
    for _ in 0..per_class {
        graphs.push(Graph::new(3, [(0, 1), (1, 2)], Some(vec![1, 1, 1])).unwrap());
        labels.push(2);
    }
    let bundle = DatasetBundle {
        name: "SYNTH".into(),
        graphs,
        class_labels: labels,
        has_vertex_attributes: true,
    };
    let ds_dir = dir.join("SYNTH");
    std::fs::create_dir_all(&ds_dir).unwrap();
    write_tu_dataset(&bundle, &ds_dir).unwrap();
    bundle
}

#[test]
fn kernel_mutag_has_constant_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("mutag.gram");
    let out = qesk_cmd(&[
        "kernel",
        "--dataset-dir",
        data_dir().to_str().unwrap(),
        "--dataset",
        "MUTAG",
        "--kind",
        "qesk",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_success(&out);
    let gram = load_gram_file(&out_path).unwrap();
    assert_eq!(gram.len(), 188);
    assert_eq!(gram.kind(), KernelKind::Qesk);
    for p in 0..gram.len() {
        assert_eq!(gram.entry(p, p), 10.0);
    }
    let manifest = std::fs::read_to_string(out_path.with_file_name("mutag.gram.manifest")).unwrap();
    assert!(manifest.contains("psd_pass: true"));
    assert!(manifest.contains("codebook_sizes: 7, 33"));
}

#[test]
fn kernel_wlsk_normalized_has_unit_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("mutag_wlsk.gram");
    let out = qesk_cmd(&[
        "kernel",
        "--dataset-dir",
        data_dir().to_str().unwrap(),
        "--dataset",
        "MUTAG",
        "--kind",
        "wlsk",
        "--normalize",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_success(&out);
    let gram = load_gram_file(&out_path).unwrap();
    assert_eq!(gram.kind(), KernelKind::WlskNormalized);
    for p in 0..gram.len() {
        assert!((gram.entry(p, p) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn kernel_imax_one_stays_in_unit_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("imax1.gram");
    let out = qesk_cmd(&[
        "kernel",
        "--dataset-dir",
        data_dir().to_str().unwrap(),
        "--dataset",
        "MUTAG",
        "--kind",
        "qesk",
        "--imax",
        "1",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_success(&out);
    let gram = load_gram_file(&out_path).unwrap();
    for p in 0..gram.len() {
        for q in 0..gram.len() {
            let v = gram.entry(p, q);
            assert!(v > 0.0 && v <= 1.0, "entry ({p},{q}) = {v}");
        }
    }
}

#[test]
fn normalize_with_qesk_is_a_config_error() {
    let out = qesk_cmd(&[
        "kernel",
        "--dataset-dir",
        data_dir().to_str().unwrap(),
        "--dataset",
        "MUTAG",
        "--kind",
        "qesk",
        "--normalize",
        "-o",
        "/tmp/never-written.gram",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn evaluate_separable_fixture_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic(tmp.path(), 10);
    let report_path = tmp.path().join("synth.report");
    let out = qesk_cmd(&[
        "evaluate",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "SYNTH",
        "--kind",
        "qesk",
        "--repetitions",
        "2",
        "--seed",
        "5",
        "-o",
        report_path.to_str().unwrap(),
    ]);
    assert_success(&out);
    let report = std::fs::read_to_string(&report_path).unwrap();
    assert!(
        report.contains("mean_accuracy: 1.0000000000000000e0"),
        "report:\n{report}"
    );
}

#[test]
fn evaluate_from_gram_file_matches_direct_run() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic(tmp.path(), 8);
    let gram_path = tmp.path().join("synth.gram");
    assert_success(&qesk_cmd(&[
        "kernel",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "SYNTH",
        "--kind",
        "wlsk",
        "--normalize",
        "-o",
        gram_path.to_str().unwrap(),
    ]));

    let direct = tmp.path().join("direct.report");
    assert_success(&qesk_cmd(&[
        "evaluate",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "SYNTH",
        "--kind",
        "wlsk",
        "--normalize",
        "--repetitions",
        "2",
        "-o",
        direct.to_str().unwrap(),
    ]));
    let loaded = tmp.path().join("loaded.report");
    assert_success(&qesk_cmd(&[
        "evaluate",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "SYNTH",
        "--kind",
        "wlsk",
        "--normalize",
        "--gram-file",
        gram_path.to_str().unwrap(),
        "--repetitions",
        "2",
        "-o",
        loaded.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read_to_string(&direct).unwrap(),
        std::fs::read_to_string(&loaded).unwrap()
    );
}

#[test]
fn evaluate_gram_size_mismatch_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_synthetic(tmp.path(), 8);
    let gram_path = tmp.path().join("small.gram");
    std::fs::write(&gram_path, "# kernel=qesk imax=1 n=1\n1.0\n").unwrap();
    let out = qesk_cmd(&[
        "evaluate",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "SYNTH",
        "--gram-file",
        gram_path.to_str().unwrap(),
        "-o",
        tmp.path().join("x.report").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn inspect_three_path_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = DatasetBundle {
        name: "PATHS".into(),
        graphs: vec![
            Graph::new(3, [(0, 1), (1, 2)], None).unwrap(),
            Graph::new(3, [], None).unwrap(),
        ],
        class_labels: vec![1, 2],
        has_vertex_attributes: false,
    };
    let ds_dir = tmp.path().join("PATHS");
    std::fs::create_dir_all(&ds_dir).unwrap();
    write_tu_dataset(&bundle, &ds_dir).unwrap();

    let dump_path = tmp.path().join("graph0.txt");
    let out = qesk_cmd(&[
        "inspect",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "PATHS",
        "--graph-index",
        "0",
        "--imax",
        "3",
        "-o",
        dump_path.to_str().unwrap(),
    ]);
    assert_success(&out);
    let dump = std::fs::read_to_string(&dump_path).unwrap();
    // center row of the 3-path mixing matrix
    let center_row = parse_matrix_row(&dump, "mixing_matrix:", 1);
    for (got, want) in center_row.iter().zip([0.25, 0.5, 0.25]) {
        assert!((got - want).abs() < 1e-12, "center row {center_row:?}");
    }
    assert!(dump.contains("labels 1: 0, 1, 0"), "dump:\n{dump}");

    // edgeless graph: zero entropies, uniform fallback weights
    let dump1_path = tmp.path().join("graph1.txt");
    assert_success(&qesk_cmd(&[
        "inspect",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "PATHS",
        "--graph-index",
        "1",
        "--imax",
        "3",
        "-o",
        dump1_path.to_str().unwrap(),
    ]));
    let dump1 = std::fs::read_to_string(&dump1_path).unwrap();
    let entropies = parse_matrix_row(&dump1, "entropies:", 0);
    assert!(entropies.iter().all(|&h| h.abs() < 1e-12), "{entropies:?}");
    assert!(dump1.contains("1, 1, 0, 1.0000000000000000e0"), "dump:\n{dump1}");

    // feature weights in any dump sum to 1 per iteration
    for text in [&dump, &dump1] {
        let mut sums = std::collections::BTreeMap::new();
        let mut in_entropic = false;
        for line in text.lines() {
            if line == "entropic_features:" {
                in_entropic = true;
                continue;
            }
            if line == "count_features:" {
                in_entropic = false;
                continue;
            }
            if in_entropic {
                let parts: Vec<&str> = line.split(", ").collect();
                let it: usize = parts[1].parse().unwrap();
                let w: f64 = parts[3].parse().unwrap();
                *sums.entry(it).or_insert(0.0) += w;
            }
        }
        for (it, sum) in sums {
            assert!((sum - 1.0f64).abs() < 1e-9, "iteration {it} sums to {sum}");
        }
    }
}

#[test]
fn inspect_out_of_range_index_fails() {
    let out = qesk_cmd(&[
        "inspect",
        "--dataset-dir",
        data_dir().to_str().unwrap(),
        "--dataset",
        "MUTAG",
        "--graph-index",
        "188",
        "-o",
        "/tmp/never.txt",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_dataset_file_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(tmp.path().join("GHOST")).unwrap();
    let out = qesk_cmd(&[
        "kernel",
        "--dataset-dir",
        tmp.path().to_str().unwrap(),
        "--dataset",
        "GHOST",
        "-o",
        tmp.path().join("x.gram").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GHOST_A.txt"));
}
