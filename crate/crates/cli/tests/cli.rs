use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scenetext::config::PipelineConfig;
use scenetext::dataset::{load_annotation, read_manifest};
use scenetext::svm::{write_model, SvmModel};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenetext"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn key(stdout: &str, name: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{name}=")))
        .unwrap_or_else(|| panic!("no {name} in {stdout}"))
        .parse()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_default_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("pipeline.conf");
    fs::write(&path, PipelineConfig::default().to_text()).unwrap();
    path
}

#[test]
fn full_workflow_reaches_target_f_measure() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let corpus = root.join("corpus");
    ok(&[
        "synth",
        "--count",
        "80",
        "--seed",
        "0",
        "--out",
        p(&corpus),
        "--test",
        "20",
    ]);
    let (images, gt) = (corpus.join("images"), corpus.join("gt"));
    let patches = root.join("patches");
    ok(&[
        "extract-patches",
        "--images",
        p(&images),
        "--gt",
        p(&gt),
        "--out",
        p(&patches),
        "--manifest",
        p(&corpus.join("train.txt")),
    ]);
    let config = write_default_config(root);
    let (pm, lm) = (root.join("patch.model"), root.join("line.model"));
    for (target, out) in [("patch", &pm), ("line", &lm)] {
        ok(&[
            "train",
            "--patches",
            p(&patches),
            "--target",
            target,
            "--out",
            p(out),
        ]);
    }
    let det = root.join("det");
    fs::create_dir(&det).unwrap();
    let test_ids = read_manifest(corpus.join("test.txt")).unwrap();
    assert_eq!(test_ids.len(), 20);
    for id in &test_ids {
        ok(&[
            "detect",
            "--image",
            p(&images.join(format!("{id}.ppm"))),
            "--patch-model",
            p(&pm),
            "--line-model",
            p(&lm),
            "--config",
            p(&config),
            "--out",
            p(&det.join(format!("{id}.txt"))),
        ]);
    }
    let report = ok(&[
        "eval",
        "--det",
        p(&det),
        "--gt",
        p(&gt),
        "--manifest",
        p(&corpus.join("test.txt")),
    ]);
    let f = key(&report, "f_measure");
    assert!(f >= 0.80, "F-measure {f}\n{report}");
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    ok(&["synth", "--count", "4", "--seed", "3", "--out", p(&corpus)]);
    let gt = corpus.join("gt");
    let report = ok(&["eval", "--det", p(&gt), "--gt", p(&gt)]);
    assert_eq!(key(&report, "precision"), 1.0);
    assert_eq!(key(&report, "recall"), 1.0);
    assert_eq!(key(&report, "images"), 4.0);
}

#[test]
fn mismatched_model_is_a_config_error_before_reading_the_image() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_default_config(tmp.path());
    let cfg = PipelineConfig::default();
    let (pm, lm) = (tmp.path().join("p.model"), tmp.path().join("l.model"));
    write_model(&pm, &SvmModel::constant(cfg.patch.len() + 1, true)).unwrap();
    write_model(&lm, &SvmModel::constant(cfg.hog.descriptor_len(), true)).unwrap();
    let out = run(&[
        "detect",
        "--image",
        p(&tmp.path().join("does_not_exist.ppm")),
        "--patch-model",
        p(&pm),
        "--line-model",
        p(&lm),
        "--config",
        p(&config),
        "--out",
        p(&tmp.path().join("o.txt")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere.model");
    let out = run(&[
        "detect",
        "--image",
        "x.ppm",
        "--patch-model",
        p(&missing),
        "--line-model",
        p(&missing),
        "--config",
        p(&write_default_config(tmp.path())),
        "--out",
        p(&tmp.path().join("o.txt")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.model"));
}

#[test]
fn debug_dump_counts_never_grow() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    ok(&["synth", "--count", "1", "--seed", "5", "--out", p(&corpus)]);
    let cfg = PipelineConfig::default();
    let (pm, lm) = (tmp.path().join("p.model"), tmp.path().join("l.model"));
    write_model(&pm, &SvmModel::constant(cfg.patch.len(), true)).unwrap();
    write_model(&lm, &SvmModel::constant(cfg.hog.descriptor_len(), true)).unwrap();
    let debug = tmp.path().join("debug");
    let out_file = tmp.path().join("det.txt");
    ok(&[
        "detect",
        "--image",
        p(&corpus.join("images/scene_0000.ppm")),
        "--patch-model",
        p(&pm),
        "--line-model",
        p(&lm),
        "--config",
        p(&write_default_config(tmp.path())),
        "--out",
        p(&out_file),
        "--debug-dir",
        p(&debug),
    ]);
    let mut names: Vec<_> = fs::read_dir(&debug)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "01_mser.txt",
            "02_geometric.txt",
            "03_patch_svm.txt",
            "04_linking.txt",
            "05_line_svm.txt"
        ]
    );
    let counts: Vec<usize> = names
        .iter()
        .map(|n| load_annotation(debug.join(n)).unwrap().boxes.len())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    assert!(counts[0] > 0);
    assert_eq!(load_annotation(&out_file).unwrap().boxes.len(), counts[4]);
}
