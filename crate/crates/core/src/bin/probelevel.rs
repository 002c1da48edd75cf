//! Command-line driver: simulate, fit, call, test, screen and evaluate.
//!
//! Each command writes its tables plus `manifest.json` into `--out`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use probelevel::background::BackgroundSource;
use probelevel::config::{RunConfig, SimKind};
use probelevel::detect::Variant;
use probelevel::eval::{ma_pa_table, roc};
use probelevel::io;
use probelevel::pipeline;
use probelevel::sim::{generate, generate_tags, TagKind};
use probelevel::tagscreen::screen_tags;
use probelevel::{Error, Result};

#[derive(Parser)]
#[command(name = "probelevel", version, about = "Probe-level microarray modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a spike-in or tag dataset with its ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
    /// Fit the background and signal plug-in model.
    FitBackground {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "mismatch")]
        source: SourceArg,
    },
    /// Presence calls for one or more variants.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Repeatable; all three variants when absent.
        #[arg(long, value_enum)]
        variant: Vec<VariantArg>,
        /// Model-based calls per array instead of per condition.
        #[arg(long)]
        per_array: bool,
    },
    /// Per-gene GEE fits and differential expression tests.
    Diffexp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Reference and treatment conditions, e.g. `3,4`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        conditions: Option<Vec<u32>>,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        #[arg(long)]
        no_background: bool,
        #[arg(long)]
        estimate_nu: bool,
    },
    /// Dead/alive screen and log ratios for two-colour tag arrays.
    Tagscreen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        llr_threshold: Option<f64>,
    },
    /// ROC table from detection p-values or tag likelihood ratios.
    Roc {
        #[command(flatten)]
        common: Common,
        /// Detection table scored by `-p`.
        #[arg(long, requires = "truth", conflicts_with = "tags")]
        detection: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Detection variant to evaluate; required when the table has several.
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Tag table scored by `llr` against dead/alive versus same representation.
        #[arg(long, requires = "tag_truth")]
        tags: Option<PathBuf>,
        #[arg(long)]
        tag_truth: Option<PathBuf>,
    },
    /// MA-PA plot table from differential expression and detection results.
    MaPa {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        diffexp: PathBuf,
        #[arg(long)]
        detection: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    LatinSquare,
    Tags,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Mismatch,
    HalfPrice,
}

impl From<SourceArg> for BackgroundSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Mismatch => BackgroundSource::Mismatch,
            SourceArg::HalfPrice => BackgroundSource::HalfPrice,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Mas5,
    ModelPmMm,
    ModelHalfPrice,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Mas5 => Variant::Mas5,
            VariantArg::ModelPmMm => Variant::ModelPmMm,
            VariantArg::ModelHalfPrice => Variant::ModelHalfPrice,
        }
    }
}

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    seed: u64,
    config_sha256: String,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    summary: serde_json::Map<String, serde_json::Value>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Collects outputs of one command and writes them with the manifest.
struct Run {
    command: &'static str,
    out: PathBuf,
    config: RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    summary: serde_json::Map<String, serde_json::Value>,
}

impl Run {
    fn new(command: &'static str, common: &Common, config: RunConfig, inputs: &[&Path]) -> Result<Self> {
        std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
            path: common.out.clone(),
            source: e,
        })?;
        Ok(Run {
            command,
            out: common.out.clone(),
            config,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: Vec::new(),
            summary: serde_json::Map::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        io::write_atomic(&path, contents)?;
        self.outputs.push(path);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let canonical = self.config.canonical_json();
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.config.seed,
            config_sha256: sha256_hex(canonical.as_bytes()),
            config: serde_json::from_str(&canonical)?,
            inputs: self.inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?,
            summary: self.summary,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        io::write_atomic(&self.out.join("manifest.json"), &text)
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, seed, kind } => {
            let mut config = load_config(&common)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(k) = kind {
                config.simulate.kind = match k {
                    KindArg::LatinSquare => SimKind::LatinSquare,
                    KindArg::Tags => SimKind::Tags,
                };
            }
            config.validate()?;
            let mut run = Run::new("simulate", &common, config.clone(), &[])?;
            match config.simulate.kind {
                SimKind::LatinSquare => {
                    let (data, truth) = generate(&config.simulate.design()?, &config.simulate.sim, config.seed)?;
                    run.write("dataset.tsv", &io::dataset_to_string(&data))?;
                    run.write("truth.tsv", &io::truth_to_string(&data, &truth))?;
                }
                SimKind::Tags => {
                    let (data, truth) = generate_tags(&config.simulate.tags, config.seed)?;
                    run.write("dataset.tsv", &io::dataset_to_string(&data))?;
                    run.write("tag_truth.tsv", &io::tag_truth_to_string(&data, &truth))?;
                }
            }
            run.finish()
        }
        Command::FitBackground { common, data, source } => {
            let config = load_config(&common)?;
            let dataset = io::read_dataset(&data)?;
            let fit = pipeline::fit_background_model(&dataset, source.into(), &config.background)?;
            let mut run = Run::new("fit-background", &common, config, &[&data])?;
            run.write("background.json", &(serde_json::to_string_pretty(&fit)? + "\n"))?;
            run.finish()
        }
        Command::Detect {
            common,
            data,
            variant,
            per_array,
        } => {
            let mut config = load_config(&common)?;
            config.detect.per_array |= per_array;
            config.validate()?;
            let dataset = io::read_dataset(&data)?;
            let variants: Vec<Variant> = if variant.is_empty() {
                vec![Variant::Mas5, Variant::ModelPmMm, Variant::ModelHalfPrice]
            } else {
                variant.into_iter().map(Variant::from).collect()
            };
            let mut results = Vec::new();
            for v in variants {
                results.extend(pipeline::detect(&dataset, v, &config.background, &config.detect)?);
            }
            let mut run = Run::new("detect", &common, config, &[&data])?;
            run.write("detection.tsv", &io::detection_to_string(&results))?;
            run.finish()
        }
        Command::Diffexp {
            common,
            data,
            conditions,
            source,
            no_background,
            estimate_nu,
        } => {
            let mut config = load_config(&common)?;
            if let Some(c) = conditions {
                config.diffexp.conditions = Some([c[0], c[1]]);
            }
            if let Some(s) = source {
                config.diffexp.source = s.into();
            }
            config.diffexp.no_background |= no_background;
            config.diffexp.estimate_nu |= estimate_nu;
            config.validate()?;
            let dataset = io::read_dataset(&data)?;
            let out = pipeline::diffexp(&dataset, &config.diffexp, &config.background)?;
            let mut run = Run::new("diffexp", &common, config, &[&data])?;
            run.write("diffexp.tsv", &io::diffexp_to_string(&out.results))?;
            run.write("background.json", &(serde_json::to_string_pretty(&out.fit)? + "\n"))?;
            run.finish()
        }
        Command::Tagscreen {
            common,
            data,
            llr_threshold,
        } => {
            let mut config = load_config(&common)?;
            if let Some(t) = llr_threshold {
                config.tagscreen.llr_threshold = t;
            }
            config.validate()?;
            let dataset = io::read_dataset(&data)?;
            let (fit, results) = screen_tags(&dataset, &config.tagscreen)?;
            let mut run = Run::new("tagscreen", &common, config, &[&data])?;
            run.write("tags.tsv", &io::tags_to_string(&results))?;
            run.write("mixture.json", &(serde_json::to_string_pretty(&fit)? + "\n"))?;
            run.finish()
        }
        Command::Roc {
            common,
            detection,
            truth,
            variant,
            tags,
            tag_truth,
        } => {
            let config = load_config(&common)?;
            let (scores, labels, inputs) = match (detection, truth, tags, tag_truth) {
                (Some(det), Some(truth), None, None) => {
                    let rows = select_variant(io::read_detection(&det)?, variant)?;
                    let presence = io::read_truth(&truth)?;
                    let mut scores = Vec::with_capacity(rows.len());
                    let mut labels = Vec::with_capacity(rows.len());
                    for r in &rows {
                        let present = presence.present(&r.gene_id, &r.group).ok_or_else(|| {
                            Error::InvalidDataset(format!("no truth for gene {} group {}", r.gene_id, r.group))
                        })?;
                        scores.push(-r.p_value);
                        labels.push(present);
                    }
                    (scores, labels, vec![det, truth])
                }
                (None, None, Some(tag_path), Some(truth_path)) => {
                    let results = io::read_tags(&tag_path)?;
                    let truth: std::collections::HashMap<String, _> =
                        io::read_tag_truth(&truth_path)?.into_iter().collect();
                    let mut scores = Vec::new();
                    let mut labels = Vec::new();
                    for r in &results {
                        let t = truth
                            .get(&r.tag_id)
                            .ok_or_else(|| Error::InvalidDataset(format!("no truth for tag {}", r.tag_id)))?;
                        if t.kind == TagKind::DeadAlive || t.same_representation() {
                            scores.push(r.llr);
                            labels.push(t.kind == TagKind::DeadAlive);
                        }
                    }
                    (scores, labels, vec![tag_path, truth_path])
                }
                _ => {
                    return Err(Error::Config(
                        "roc needs either --detection with --truth or --tags with --tag-truth".into(),
                    ))
                }
            };
            let table = roc(&scores, &labels)?;
            println!("auc\t{}", table.auc);
            let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            let mut run = Run::new("roc", &common, config, &refs)?;
            run.summary.insert("auc".into(), serde_json::json!(table.auc));
            run.write("roc.tsv", &io::roc_to_string(&table))?;
            run.finish()
        }
        Command::MaPa {
            common,
            diffexp,
            detection,
            variant,
        } => {
            let config = load_config(&common)?;
            let fits = io::read_diffexp(&diffexp)?;
            let calls = select_variant(io::read_detection(&detection)?, variant)?;
            let rows = ma_pa_table(&fits, &calls, config.diffexp.gee.level)?;
            let mut run = Run::new("ma-pa", &common, config, &[&diffexp, &detection])?;
            run.write("mapa.tsv", &io::mapa_to_string(&rows))?;
            run.finish()
        }
    }
}

fn select_variant(
    rows: Vec<probelevel::detect::DetectionResult>,
    variant: Option<VariantArg>,
) -> Result<Vec<probelevel::detect::DetectionResult>> {
    let wanted = match variant {
        Some(v) => Variant::from(v),
        None => {
            let first = rows.first().map(|r| r.variant);
            if rows.iter().any(|r| Some(r.variant) != first) {
                return Err(Error::Config(
                    "detection table holds several variants; pass --variant".into(),
                ));
            }
            return Ok(rows);
        }
    };
    Ok(rows.into_iter().filter(|r| r.variant == wanted).collect())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
