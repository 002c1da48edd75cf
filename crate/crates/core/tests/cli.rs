//! End-to-end runs of the `probelevel` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use probelevel::background::BackgroundOptions;
use probelevel::config::RunConfig;
use probelevel::io::{read_dataset, read_detection, read_diffexp};
use probelevel::pipeline::diffexp;

const CONFIG: &str = r#"{
  "seed": 4,
  "simulate": {"mixtures": [3, 4], "sim": {"background_genes": 400}}
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_probelevel"))
}

fn run(args: &[&str]) -> std::process::Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// simulate, detect and diffexp into `dir`, returning the dataset path.
fn pipeline(dir: &Path, config: &Path) -> PathBuf {
    let sim = dir.join("sim");
    let det = dir.join("det");
    let de = dir.join("de");
    run(&["simulate", "--config", s(config), "--out", s(&sim)]);
    let data = sim.join("dataset.tsv");
    run(&["detect", "--config", s(config), "--data", s(&data), "--out", s(&det)]);
    run(&["diffexp", "--config", s(config), "--data", s(&data), "--out", s(&de)]);
    run(&[
        "ma-pa",
        "--diffexp",
        s(&de.join("diffexp.tsv")),
        "--detection",
        s(&det.join("detection.tsv")),
        "--variant",
        "model-pm-mm",
        "--out",
        s(&dir.join("mapa")),
    ]);
    data
}

#[test]
fn repeated_runs_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("config.json");
    fs::write(&config, CONFIG).unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    pipeline(&a, &config);
    pipeline(&b, &config);
    for file in [
        "sim/dataset.tsv",
        "sim/truth.tsv",
        "det/detection.tsv",
        "de/diffexp.tsv",
        "mapa/mapa.tsv",
    ] {
        let (x, y) = (fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
        assert!(!x.is_empty(), "{file} is empty");
        assert_eq!(x, y, "{file} differs between runs");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("de/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "diffexp");
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn cli_diffexp_matches_library() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("config.json");
    fs::write(&config, CONFIG).unwrap();
    let data = pipeline(root.path(), &config);

    let cfg = RunConfig::from_json(CONFIG).unwrap();
    let lib = diffexp(
        &read_dataset(&data).unwrap(),
        &cfg.diffexp,
        &BackgroundOptions::default(),
    )
    .unwrap();
    let cli = read_diffexp(&root.path().join("de/diffexp.tsv")).unwrap();
    assert_eq!(cli.len(), lib.results.len());
    for (c, l) in cli.iter().zip(&lib.results) {
        assert_eq!(c.gene_id, l.gene_id);
        assert_eq!(c.beta1.to_bits(), l.beta1.to_bits(), "{}", c.gene_id);
        assert_eq!(c.se_beta1.to_bits(), l.se_beta1.to_bits());
        assert_eq!(c.status, l.status);
    }
    assert!(!read_detection(&root.path().join("det/detection.tsv"))
        .unwrap()
        .is_empty());
}

#[test]
fn default_simulation_is_the_full_latin_square() {
    let root = tempfile::tempdir().unwrap();
    run(&["simulate", "--seed", "1", "--out", s(root.path())]);
    let d = read_dataset(&root.path().join("dataset.tsv")).unwrap();
    assert_eq!((d.n_genes(), d.n_arrays()), (42, 42));
    assert_eq!(d.channels().len(), 2);
}

#[test]
fn tag_screen_roc_reports_auc() {
    let root = tempfile::tempdir().unwrap();
    let sim = root.path().join("sim");
    let screen = root.path().join("screen");
    run(&["simulate", "--kind", "tags", "--seed", "2", "--out", s(&sim)]);
    run(&["tagscreen", "--data", s(&sim.join("dataset.tsv")), "--out", s(&screen)]);
    let out = run(&[
        "roc",
        "--tags",
        s(&screen.join("tags.tsv")),
        "--tag-truth",
        s(&sim.join("tag_truth.tsv")),
        "--out",
        s(&root.path().join("roc")),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let auc: f64 = stdout.trim().strip_prefix("auc\t").unwrap().parse().unwrap();
    assert!(auc > 0.95, "{stdout}");
}

#[test]
fn bad_inputs_exit_nonzero() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("bad.json");
    fs::write(&config, r#"{"seeed": 1}"#).unwrap();
    let out = bin()
        .args(["simulate", "--config", s(&config), "--out", s(root.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let missing = root.path().join("nope.tsv");
    let out = bin()
        .args(["detect", "--data", s(&missing), "--out", s(root.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
