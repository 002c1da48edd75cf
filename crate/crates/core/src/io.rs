//! Tab-separated file formats.
//!
//! Every file has a header row. Floats are written with Rust's shortest
//! round-trip formatting, which never uses an exponent; dataset intensities
//! are read back with exponents rejected. Writes go to a temporary file in
//! the target directory and are renamed into place.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::detect::{Call, DetectionResult, Variant};
use crate::error::{Error, Result};
use crate::eval::{MaPaRow, RocTable};
use crate::gee::{FitStatus, GeneFitResult};
use crate::model::{ArrayMeta, Probe, ProbeLevelDataset, ProbeSet};
use crate::sim::{GroundTruth, TagKind, TagTruth};
use crate::tagscreen::{TagClass, TagResult};

pub const DATASET_COLUMNS: [&str; 7] = [
    "gene_id",
    "probe_idx",
    "channel",
    "array_id",
    "condition",
    "intensity",
    "sequence",
];

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn join_row(out: &mut String, fields: &[&str]) {
    out.push_str(&fields.join("\t"));
    out.push('\n');
}

/// A parsed table: header plus rows tagged with their 1-based line number.
struct Table<'a> {
    file: &'a str,
    header: Vec<&'a str>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Table<'a> {
    fn parse(file: &'a str, text: &'a str, required: &[&str]) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.strip_suffix('\r').unwrap_or(l)));
        let (_, head) = lines
            .next()
            .ok_or_else(|| parse_error(file, 1, 1, "empty file, header row required"))?;
        let header: Vec<&str> = head.split('\t').collect();
        for name in required {
            if !header.contains(name) {
                return Err(parse_error(file, 1, header.len(), &format!("missing column `{name}`")));
            }
        }
        let mut rows = Vec::new();
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != header.len() {
                let column = fields.len().min(header.len()) + 1;
                return Err(parse_error(
                    file,
                    line,
                    column,
                    &format!("expected {} fields, found {}", header.len(), fields.len()),
                ));
            }
            rows.push((line, fields));
        }
        Ok(Table { file, header, rows })
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| *h == name).expect("checked in parse")
    }

    fn error(&self, line: usize, col: usize, message: &str) -> Error {
        parse_error(self.file, line, col + 1, message)
    }

    fn float(&self, line: usize, fields: &[&str], col: usize) -> Result<f64> {
        fields[col]
            .parse::<f64>()
            .map_err(|_| self.error(line, col, &format!("`{}` is not a number", fields[col])))
    }

    fn opt_float(&self, line: usize, fields: &[&str], col: usize) -> Result<Option<f64>> {
        if fields[col].is_empty() {
            Ok(None)
        } else {
            self.float(line, fields, col).map(Some)
        }
    }

    fn uint<T: std::str::FromStr>(&self, line: usize, fields: &[&str], col: usize) -> Result<T> {
        fields[col]
            .parse::<T>()
            .map_err(|_| self.error(line, col, &format!("`{}` is not a nonnegative integer", fields[col])))
    }

    fn flag(&self, line: usize, fields: &[&str], col: usize) -> Result<bool> {
        match fields[col] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.error(line, col, &format!("`{other}` is not 0 or 1"))),
        }
    }

    fn keyword<T>(&self, line: usize, fields: &[&str], col: usize, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        parse(fields[col]).ok_or_else(|| self.error(line, col, &format!("unknown value `{}`", fields[col])))
    }
}

fn parse_error(file: &str, line: usize, column: usize, message: &str) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        column,
        message: message.to_string(),
    }
}

/// Plain decimal: optional sign, digits, at most one point.
fn parse_decimal(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['-', '+']).unwrap_or(s);
    let ok = !body.is_empty()
        && body.chars().all(|c| c.is_ascii_digit() || c == '.')
        && body.chars().filter(|&c| c == '.').count() <= 1
        && body.chars().any(|c| c.is_ascii_digit());
    if ok {
        s.parse().ok()
    } else {
        None
    }
}

pub fn dataset_to_string(dataset: &ProbeLevelDataset) -> String {
    let mut out = String::new();
    join_row(&mut out, &DATASET_COLUMNS);
    for (g, gene) in dataset.genes().iter().enumerate() {
        for (j, probe) in gene.probes.iter().enumerate() {
            let p = dataset.flat_probe(g, j);
            for (i, array) in dataset.arrays().iter().enumerate() {
                for (h, channel) in dataset.channels().iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        gene.gene_id,
                        probe.index,
                        channel,
                        array.id,
                        array.condition,
                        dataset.value(p, i, h),
                        probe.sequences[h]
                    );
                }
            }
        }
    }
    out
}

pub fn write_dataset(path: &Path, dataset: &ProbeLevelDataset) -> Result<()> {
    write_atomic(path, &dataset_to_string(dataset))
}

pub fn read_dataset(path: &Path) -> Result<ProbeLevelDataset> {
    parse_dataset(&path.display().to_string(), &read_to_string(path)?)
}

/// Parses a complete dataset table. Genes, probes, arrays and channels keep
/// their order of first appearance.
pub fn parse_dataset(file: &str, text: &str) -> Result<ProbeLevelDataset> {
    let t = Table::parse(file, text, &DATASET_COLUMNS)?;
    let [c_gene, c_probe, c_chan, c_array, c_cond, c_int, c_seq] = DATASET_COLUMNS.map(|c| t.col(c));

    let mut gene_ix: HashMap<&str, usize> = HashMap::new();
    let mut genes: Vec<(&str, Vec<u32>, HashMap<u32, usize>)> = Vec::new();
    let mut array_ix: HashMap<&str, usize> = HashMap::new();
    let mut arrays: Vec<ArrayMeta> = Vec::new();
    let mut chan_ix: HashMap<&str, usize> = HashMap::new();
    let mut channels: Vec<String> = Vec::new();
    let mut values: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
    let mut sequences: HashMap<(usize, usize, usize), &str> = HashMap::new();

    for (line, f) in &t.rows {
        let line = *line;
        if f[c_gene].is_empty() {
            return Err(t.error(line, c_gene, "empty gene id"));
        }
        let g = *gene_ix.entry(f[c_gene]).or_insert_with(|| {
            genes.push((f[c_gene], Vec::new(), HashMap::new()));
            genes.len() - 1
        });
        let index: u32 = t.uint(line, f, c_probe)?;
        let (_, order, lookup) = &mut genes[g];
        let j = *lookup.entry(index).or_insert_with(|| {
            order.push(index);
            order.len() - 1
        });
        let condition: u32 = t.uint(line, f, c_cond)?;
        let i = match array_ix.get(f[c_array]) {
            Some(&i) => {
                if arrays[i].condition != condition {
                    return Err(t.error(
                        line,
                        c_cond,
                        &format!("array {} already has condition {}", arrays[i].id, arrays[i].condition),
                    ));
                }
                i
            }
            None => {
                if f[c_array].is_empty() {
                    return Err(t.error(line, c_array, "empty array id"));
                }
                arrays.push(ArrayMeta {
                    id: f[c_array].to_string(),
                    condition,
                });
                array_ix.insert(f[c_array], arrays.len() - 1);
                arrays.len() - 1
            }
        };
        let h = *chan_ix.entry(f[c_chan]).or_insert_with(|| {
            channels.push(f[c_chan].to_string());
            channels.len() - 1
        });
        let value = parse_decimal(f[c_int])
            .filter(|v| *v >= 0.0)
            .ok_or_else(|| t.error(line, c_int, &format!("`{}` is not a nonnegative decimal", f[c_int])))?;
        let seq = f[c_seq];
        if seq.is_empty() || !seq.bytes().all(|b| matches!(b, b'A' | b'C' | b'G' | b'T')) {
            return Err(t.error(line, c_seq, "sequence must be a nonempty string over ACGT"));
        }
        match sequences.get(&(g, j, h)) {
            Some(&prev) if prev != seq => {
                return Err(t.error(
                    line,
                    c_seq,
                    "sequence differs from an earlier row of the same probe and channel",
                ))
            }
            Some(_) => {}
            None => {
                sequences.insert((g, j, h), seq);
            }
        }
        if values.insert((g, j, i, h), value).is_some() {
            return Err(t.error(line, c_gene, "duplicate row for this gene, probe, array and channel"));
        }
    }

    let (n_i, n_h) = (arrays.len(), channels.len());
    let n_probes: usize = genes.iter().map(|g| g.1.len()).sum();
    if values.len() != n_probes * n_i * n_h {
        return Err(Error::InvalidDataset(format!(
            "{file}: incomplete table, {} rows for {n_probes} probes x {n_i} arrays x {n_h} channels",
            values.len()
        )));
    }
    let mut intensities = Vec::with_capacity(values.len());
    let mut sets = Vec::with_capacity(genes.len());
    for (g, (id, order, _)) in genes.iter().enumerate() {
        let mut probes = Vec::with_capacity(order.len());
        for (j, &index) in order.iter().enumerate() {
            for i in 0..n_i {
                for h in 0..n_h {
                    intensities.push(values[&(g, j, i, h)]);
                }
            }
            probes.push(Probe {
                index,
                sequences: (0..n_h).map(|h| sequences[&(g, j, h)].to_string()).collect(),
            });
        }
        sets.push(ProbeSet {
            gene_id: id.to_string(),
            probes,
        });
    }
    ProbeLevelDataset::new(sets, arrays, channels, intensities)
}

const TRUTH_COLUMNS: [&str; 6] = ["gene_id", "array_id", "condition", "spiked", "concentration", "present"];

pub fn truth_to_string(dataset: &ProbeLevelDataset, truth: &GroundTruth) -> String {
    let mut out = String::new();
    join_row(&mut out, &TRUTH_COLUMNS);
    for (g, gene) in dataset.genes().iter().enumerate() {
        for (i, array) in dataset.arrays().iter().enumerate() {
            let conc = truth.concentration[g].as_ref().map(|c| c[i]);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                gene.gene_id,
                array.id,
                array.condition,
                u8::from(truth.spiked[g]),
                opt(conc),
                u8::from(truth.present[g][i])
            );
        }
    }
    out
}

/// Presence of specific signal per gene and array, as read from a truth file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PresenceTruth {
    present: HashMap<(String, String), bool>,
    conditions: HashMap<String, u32>,
}

impl PresenceTruth {
    /// Truth for one detection group: an array id, or `condition_<k>`
    /// meaning present on any array of condition `k`.
    pub fn present(&self, gene_id: &str, group: &str) -> Option<bool> {
        if let Some(k) = group.strip_prefix("condition_").and_then(|k| k.parse::<u32>().ok()) {
            let arrays: Vec<&String> = self
                .conditions
                .iter()
                .filter(|(_, &c)| c == k)
                .map(|(a, _)| a)
                .collect();
            if arrays.is_empty() {
                return None;
            }
            let mut any = false;
            for a in arrays {
                any |= *self.present.get(&(gene_id.to_string(), a.clone()))?;
            }
            Some(any)
        } else {
            self.present.get(&(gene_id.to_string(), group.to_string())).copied()
        }
    }
}

pub fn read_truth(path: &Path) -> Result<PresenceTruth> {
    let file = path.display().to_string();
    let text = read_to_string(path)?;
    let t = Table::parse(&file, &text, &TRUTH_COLUMNS)?;
    let (cg, ca, cc, cp) = (
        t.col("gene_id"),
        t.col("array_id"),
        t.col("condition"),
        t.col("present"),
    );
    let mut truth = PresenceTruth::default();
    for (line, f) in &t.rows {
        let condition: u32 = t.uint(*line, f, cc)?;
        truth.conditions.insert(f[ca].to_string(), condition);
        truth
            .present
            .insert((f[cg].to_string(), f[ca].to_string()), t.flag(*line, f, cp)?);
    }
    Ok(truth)
}

const DETECTION_COLUMNS: [&str; 6] = ["gene_id", "variant", "group", "statistic", "p_value", "call"];

pub fn detection_to_string(results: &[DetectionResult]) -> String {
    let mut out = String::new();
    join_row(&mut out, &DETECTION_COLUMNS);
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.gene_id,
            r.variant.as_str(),
            r.group,
            r.statistic,
            r.p_value,
            r.call.as_str()
        );
    }
    out
}

pub fn read_detection(path: &Path) -> Result<Vec<DetectionResult>> {
    let file = path.display().to_string();
    let text = read_to_string(path)?;
    let t = Table::parse(&file, &text, &DETECTION_COLUMNS)?;
    let [cg, cv, cr, cs, cp, cc] = DETECTION_COLUMNS.map(|c| t.col(c));
    t.rows
        .iter()
        .map(|(line, f)| {
            Ok(DetectionResult {
                gene_id: f[cg].to_string(),
                variant: t.keyword(*line, f, cv, Variant::parse)?,
                group: f[cr].to_string(),
                statistic: t.float(*line, f, cs)?,
                p_value: t.float(*line, f, cp)?,
                call: t.keyword(*line, f, cc, Call::parse)?,
            })
        })
        .collect()
}

const DIFFEXP_COLUMNS: [&str; 11] = [
    "gene_id",
    "beta0",
    "beta1",
    "beta1_log2",
    "se_beta1",
    "cov_00",
    "cov_01",
    "cov_11",
    "p_value",
    "status",
    "iterations",
];

pub fn diffexp_to_string(results: &[GeneFitResult]) -> String {
    let mut out = String::new();
    join_row(&mut out, &DIFFEXP_COLUMNS);
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.gene_id,
            r.beta0,
            r.beta1,
            r.beta1 / std::f64::consts::LN_2,
            r.se_beta1,
            r.covariance[0][0],
            r.covariance[0][1],
            r.covariance[1][1],
            r.p_value,
            r.status.as_str(),
            r.iterations
        );
    }
    out
}

pub fn read_diffexp(path: &Path) -> Result<Vec<GeneFitResult>> {
    let file = path.display().to_string();
    let text = read_to_string(path)?;
    let t = Table::parse(&file, &text, &DIFFEXP_COLUMNS)?;
    let c = |name| t.col(name);
    t.rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            let c01 = t.float(line, f, c("cov_01"))?;
            Ok(GeneFitResult {
                gene_id: f[c("gene_id")].to_string(),
                beta0: t.float(line, f, c("beta0"))?,
                beta1: t.float(line, f, c("beta1"))?,
                covariance: [
                    [t.float(line, f, c("cov_00"))?, c01],
                    [c01, t.float(line, f, c("cov_11"))?],
                ],
                se_beta1: t.float(line, f, c("se_beta1"))?,
                p_value: t.float(line, f, c("p_value"))?,
                status: t.keyword(line, f, c("status"), FitStatus::parse)?,
                iterations: t.uint(line, f, c("iterations"))?,
            })
        })
        .collect()
}

const TAG_COLUMNS: [&str; 6] = [
    "tag_id",
    "llr",
    "classification",
    "log_ratio",
    "log2_ratio",
    "raw_log_ratio",
];

pub fn tags_to_string(results: &[TagResult]) -> String {
    let mut out = String::new();
    join_row(&mut out, &TAG_COLUMNS);
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.tag_id,
            r.llr,
            r.class.as_str(),
            opt(r.log_ratio),
            opt(r.log_ratio.map(|x| x / std::f64::consts::LN_2)),
            r.raw_log_ratio
        );
    }
    out
}

pub fn read_tags(path: &Path) -> Result<Vec<TagResult>> {
    let file = path.display().to_string();
    let text = read_to_string(path)?;
    let t = Table::parse(&file, &text, &TAG_COLUMNS)?;
    let [ci, cl, cc, cr, _, cw] = TAG_COLUMNS.map(|c| t.col(c));
    t.rows
        .iter()
        .map(|(line, f)| {
            Ok(TagResult {
                tag_id: f[ci].to_string(),
                llr: t.float(*line, f, cl)?,
                class: t.keyword(*line, f, cc, TagClass::parse)?,
                log_ratio: t.opt_float(*line, f, cr)?,
                raw_log_ratio: t.float(*line, f, cw)?,
            })
        })
        .collect()
}

const TAG_TRUTH_COLUMNS: [&str; 6] = ["tag_id", "kind", "group", "alive_red", "alive_green", "log_ratio"];

pub fn tag_truth_to_string(dataset: &ProbeLevelDataset, truth: &[TagTruth]) -> String {
    let mut out = String::new();
    join_row(&mut out, &TAG_TRUTH_COLUMNS);
    for (gene, t) in dataset.genes().iter().zip(truth) {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            gene.gene_id,
            t.kind.as_str(),
            t.group,
            u8::from(t.alive_red),
            u8::from(t.alive_green),
            opt(t.log_ratio)
        );
    }
    out
}

pub fn read_tag_truth(path: &Path) -> Result<Vec<(String, TagTruth)>> {
    let file = path.display().to_string();
    let text = read_to_string(path)?;
    let t = Table::parse(&file, &text, &TAG_TRUTH_COLUMNS)?;
    let [ci, ck, cg, cr, cgr, cl] = TAG_TRUTH_COLUMNS.map(|c| t.col(c));
    t.rows
        .iter()
        .map(|(line, f)| {
            Ok((
                f[ci].to_string(),
                TagTruth {
                    kind: t.keyword(*line, f, ck, TagKind::parse)?,
                    group: f[cg].to_string(),
                    alive_red: t.flag(*line, f, cr)?,
                    alive_green: t.flag(*line, f, cgr)?,
                    log_ratio: t.opt_float(*line, f, cl)?,
                },
            ))
        })
        .collect()
}

pub fn roc_to_string(table: &RocTable) -> String {
    let mut out = String::from("fp\ttp\tfpr\ttpr\n");
    for &(fp, tp) in &table.points {
        let _ = writeln!(
            out,
            "{fp}\t{tp}\t{}\t{}",
            fp as f64 / table.n_neg as f64,
            tp as f64 / table.n_pos as f64
        );
    }
    out
}

const MAPA_COLUMNS: [&str; 9] = [
    "gene_id",
    "a",
    "m",
    "se_m",
    "detection_p",
    "lower",
    "upper",
    "de_p",
    "status",
];

pub fn mapa_to_string(rows: &[MaPaRow]) -> String {
    let mut out = String::new();
    join_row(&mut out, &MAPA_COLUMNS);
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.gene_id,
            r.a,
            r.m,
            r.se_m,
            opt(r.detection_p),
            r.lower,
            r.upper,
            r.de_p,
            r.status.as_str()
        );
    }
    out
}
