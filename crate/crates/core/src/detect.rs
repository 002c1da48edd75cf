//! Presence calls.
//!
//! Two tests of whether a probeset carries specific signal: the signed-rank
//! test on discrimination scores `(PM - MM) / (PM + MM)`, and a model-based
//! test that compares `log(PM - O)` with the predicted background
//! distribution of each probe, pooling replicate arrays through an
//! effective sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundFit;
use crate::error::{Error, Result};
use crate::model::{ProbeLevelDataset, MM, PM};
use crate::numeric::{normal_sf, wilcoxon_signed_rank};

pub const DEFAULT_TAU: f64 = 0.015;
pub const PRESENT_BELOW: f64 = 0.4;
pub const ABSENT_ABOVE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Call {
    P,
    M,
    A,
}

impl Call {
    /// P below `present_below`, A above `absent_above`, M in between (inclusive).
    pub fn from_p(p: f64, present_below: f64, absent_above: f64) -> Call {
        if p < present_below {
            Call::P
        } else if p > absent_above {
            Call::A
        } else {
            Call::M
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Call::P => "P",
            Call::M => "M",
            Call::A => "A",
        }
    }

    pub fn parse(s: &str) -> Option<Call> {
        match s {
            "P" => Some(Call::P),
            "M" => Some(Call::M),
            "A" => Some(Call::A),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mas5,
    ModelPmMm,
    ModelHalfPrice,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Mas5 => "mas5",
            Variant::ModelPmMm => "model_pm_mm",
            Variant::ModelHalfPrice => "model_half_price",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "mas5" => Some(Variant::Mas5),
            "model_pm_mm" => Some(Variant::ModelPmMm),
            "model_half_price" => Some(Variant::ModelHalfPrice),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub gene_id: String,
    pub variant: Variant,
    /// Array id for per-array calls, `condition_<k>` for pooled calls.
    pub group: String,
    pub statistic: f64,
    pub p_value: f64,
    pub call: Call,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectOptions {
    pub tau: f64,
    pub present_below: f64,
    pub absent_above: f64,
    /// One model-based call per array instead of one per condition.
    pub per_array: bool,
    pub floor: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            tau: DEFAULT_TAU,
            present_below: PRESENT_BELOW,
            absent_above: ABSENT_ABOVE,
            per_array: false,
            floor: 0.5,
        }
    }
}

impl DetectOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.present_below && self.present_below <= self.absent_above && self.absent_above <= 1.0) {
            return Err(Error::Config(
                "call thresholds must satisfy 0 <= present_below <= absent_above <= 1".into(),
            ));
        }
        if !self.tau.is_finite() || !(self.floor > 0.0) {
            return Err(Error::Config("tau must be finite and floor positive".into()));
        }
        Ok(())
    }
}

/// Signed-rank test of `median(R) > tau` with `R = (PM - MM) / (PM + MM)`.
///
/// Probes with `PM + MM = 0` are dropped. Returns `(W+, p)`.
pub fn mas5_detect(pm: &[f64], mm: &[f64], tau: f64) -> Result<(f64, f64)> {
    if pm.len() != mm.len() {
        return Err(Error::DimensionMismatch("PM and MM counts differ".into()));
    }
    let r: Vec<f64> = pm
        .iter()
        .zip(mm)
        .filter(|(a, b)| *a + *b > 0.0)
        .map(|(a, b)| (a - b) / (a + b))
        .collect();
    if r.is_empty() {
        return Err(Error::NoValidProbes);
    }
    let t = wilcoxon_signed_rank(&r, tau)?;
    Ok((t.w_plus, t.p_value))
}

/// Inputs of the model-based test for one probeset on the arrays of one group.
#[derive(Debug, Clone)]
pub struct ModelDetectInput<'a> {
    /// PM intensities `[probe][array]`.
    pub pm: &'a [Vec<f64>],
    /// Predicted log background `[probe][array]`.
    pub mu: &'a [Vec<f64>],
    pub optical: &'a [f64],
    pub sigma_n: f64,
    pub rho_n: f64,
    pub floor: f64,
}

/// One-sided test of zero specific signal.
///
/// `z = (log(max(PM - O, floor)) - mu) / sigma_N`; the statistic is
/// `mean(z) sqrt(J I_eff)` with `I_eff = I / (1 + (I - 1) rho_N)`, and the
/// p-value is its upper normal tail. Returns `(T, p)`.
pub fn model_detect(input: &ModelDetectInput) -> Result<(f64, f64)> {
    let j = input.pm.len();
    if input.mu.len() != j {
        return Err(Error::NoBackgroundModel(
            "no predicted background for some probes".into(),
        ));
    }
    if j < 3 {
        return Err(Error::InsufficientProbes { needed: 3, got: j });
    }
    let i_n = input.optical.len();
    if i_n == 0
        || input
            .pm
            .iter()
            .zip(input.mu)
            .any(|(y, m)| y.len() != i_n || m.len() != i_n)
    {
        return Err(Error::DimensionMismatch(
            "model detection inputs disagree on arrays".into(),
        ));
    }
    if !(input.sigma_n > 0.0) {
        return Err(Error::InvalidParameter("sigma_N must be positive".into()));
    }
    let mut total = 0.0;
    for (y, m) in input.pm.iter().zip(input.mu) {
        for i in 0..i_n {
            total += ((y[i] - input.optical[i]).max(input.floor).ln() - m[i]) / input.sigma_n;
        }
    }
    let n = (j * i_n) as f64;
    let i_eff = i_n as f64 / (1.0 + (i_n as f64 - 1.0) * input.rho_n);
    let t = total / n * (j as f64 * i_eff).sqrt();
    Ok((t, normal_sf(t)))
}

/// Array groups tested together: single arrays or whole conditions.
fn groups(dataset: &ProbeLevelDataset, per_array: bool) -> Vec<(String, Vec<usize>)> {
    if per_array {
        return dataset
            .arrays()
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), vec![i]))
            .collect();
    }
    let mut conds: Vec<u32> = dataset.arrays().iter().map(|a| a.condition).collect();
    conds.sort_unstable();
    conds.dedup();
    conds
        .into_iter()
        .map(|c| (format!("condition_{c}"), dataset.arrays_in_condition(c)))
        .collect()
}

/// Model-based test of gene `g` on `arrays`, using the plug-ins in `fit`.
pub fn model_detect_gene(
    dataset: &ProbeLevelDataset,
    fit: &BackgroundFit,
    g: usize,
    arrays: &[usize],
    floor: f64,
) -> Result<(f64, f64)> {
    let pm = dataset.require_channel(PM)?;
    let probes: Vec<usize> = dataset.probe_range(g).collect();
    let y: Vec<Vec<f64>> = probes
        .iter()
        .map(|&p| arrays.iter().map(|&i| dataset.value(p, i, pm)).collect())
        .collect();
    let mu: Vec<Vec<f64>> = probes
        .iter()
        .map(|&p| arrays.iter().map(|&i| fit.mu(p, i)).collect())
        .collect();
    let optical: Vec<f64> = arrays.iter().map(|&i| fit.optical[i]).collect();
    model_detect(&ModelDetectInput {
        pm: &y,
        mu: &mu,
        optical: &optical,
        sigma_n: fit.sigma_n,
        rho_n: fit.rho_n,
        floor,
    })
}

/// Calls for every gene of `dataset`.
///
/// The signed-rank variant is always per array and needs MM. The model
/// variants need a background fit, per array or pooled by condition
/// according to `opts.per_array`.
pub fn detect_dataset(
    dataset: &ProbeLevelDataset,
    variant: Variant,
    fit: Option<&BackgroundFit>,
    opts: &DetectOptions,
) -> Result<Vec<DetectionResult>> {
    opts.validate()?;
    let pm = dataset.require_channel(PM)?;
    let per_array = opts.per_array || variant == Variant::Mas5;
    let groups = groups(dataset, per_array);
    let mm = match variant {
        Variant::Mas5 => Some(dataset.require_channel(MM)?),
        _ => None,
    };
    let fit = match variant {
        Variant::Mas5 => None,
        _ => {
            let f =
                fit.ok_or_else(|| Error::NoBackgroundModel(format!("{} needs a background fit", variant.as_str())))?;
            f.check_dataset(dataset)?;
            Some(f)
        }
    };
    let per_gene: Vec<Vec<DetectionResult>> = (0..dataset.n_genes())
        .into_par_iter()
        .map(|g| {
            groups
                .iter()
                .map(|(label, arrays)| {
                    let (statistic, p_value) = match (mm, fit) {
                        (Some(mm), _) => {
                            let i = arrays[0];
                            let pmv: Vec<f64> = dataset.probe_range(g).map(|p| dataset.value(p, i, pm)).collect();
                            let mmv: Vec<f64> = dataset.probe_range(g).map(|p| dataset.value(p, i, mm)).collect();
                            mas5_detect(&pmv, &mmv, opts.tau)?
                        }
                        (None, Some(f)) => model_detect_gene(dataset, f, g, arrays, opts.floor)?,
                        (None, None) => unreachable!("variant requirements checked above"),
                    };
                    Ok(DetectionResult {
                        gene_id: dataset.genes()[g].gene_id.clone(),
                        variant,
                        group: label.clone(),
                        statistic,
                        p_value,
                        call: Call::from_p(p_value, opts.present_below, opts.absent_above),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_gene.into_iter().flatten().collect())
}
