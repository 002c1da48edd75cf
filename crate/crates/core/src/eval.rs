//! Evaluation tables: ROC curves, MA-PA plot data and SE calibration.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::detect::DetectionResult;
use crate::error::{Error, Result};
use crate::gee::{de_test, FitStatus, GeneFitResult};
use crate::numeric::{median, normal_quantile, sample_variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocTable {
    /// Cumulative `(false positives, true positives)` from `(0, 0)` to
    /// `(n_neg, n_pos)`, one point per distinct score.
    pub points: Vec<(usize, usize)>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// ROC curve of `scores` (larger means more likely positive) against `truth`.
pub fn roc(scores: &[f64], truth: &[bool]) -> Result<RocTable> {
    if scores.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("score {bad} is not comparable")));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateTruth);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0, 0)];
    let (mut fp, mut tp) = (0, 0);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (fp0, tp0) = (fp, tp);
        while k < order.len() && scores[order[k]] == s {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push((fp, tp));
    }
    Ok(RocTable {
        points,
        auc: area / (n_pos as f64 * n_neg as f64),
        n_pos,
        n_neg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaPaRow {
    pub gene_id: String,
    /// `(beta0 + beta1) / 2` in log2 units.
    pub a: f64,
    /// `beta1` in log2 units.
    pub m: f64,
    pub se_m: f64,
    /// Smallest detection p-value over the gene's groups, if any.
    pub detection_p: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub de_p: f64,
    pub status: FitStatus,
}

/// One row per fitted gene, in fit order; bounds are `-/+ z_{1-level/2} SE`.
pub fn ma_pa_table(fits: &[GeneFitResult], detection: &[DetectionResult], level: f64) -> Result<Vec<MaPaRow>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level {level} outside (0, 1)")));
    }
    let mut best: HashMap<&str, f64> = HashMap::new();
    for d in detection {
        let p = best.entry(d.gene_id.as_str()).or_insert(f64::INFINITY);
        *p = p.min(d.p_value);
    }
    if !detection.is_empty() && !fits.iter().any(|f| best.contains_key(f.gene_id.as_str())) {
        return Err(Error::InvalidParameter(
            "differential expression and detection results share no genes".into(),
        ));
    }
    let z = normal_quantile(1.0 - level / 2.0);
    Ok(fits
        .iter()
        .map(|f| {
            let se = f.se_beta1 / LN_2;
            MaPaRow {
                gene_id: f.gene_id.clone(),
                a: (f.beta0 + f.beta1) / 2.0 / LN_2,
                m: f.beta1 / LN_2,
                se_m: se,
                detection_p: best.get(f.gene_id.as_str()).copied(),
                lower: -z * se,
                upper: z * se,
                de_p: match f.status {
                    FitStatus::Converged => de_test(f.beta1, f.se_beta1, level).p_value,
                    _ => f.p_value,
                },
                status: f.status,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeCalibration {
    pub n: usize,
    pub empirical_sd: f64,
    pub median_se: f64,
}

impl SeCalibration {
    pub fn ratio(&self) -> f64 {
        self.median_se / self.empirical_sd
    }
}

/// Empirical SD of replicated estimates against their median reported SE.
pub fn se_calibration(estimates: &[f64], ses: &[f64]) -> Result<SeCalibration> {
    if estimates.len() != ses.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates for {} standard errors",
            estimates.len(),
            ses.len()
        )));
    }
    if estimates.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: estimates.len(),
        });
    }
    Ok(SeCalibration {
        n: estimates.len(),
        empirical_sd: sample_variance(estimates).sqrt(),
        median_se: median(ses),
    })
}
