//! End-to-end steps shared by the command-line driver and the tests.

use std::collections::BTreeSet;

use crate::background::{
    estimate_nu, fit_background, fit_background_affinity, fit_plugins, BackgroundFit, BackgroundOptions,
    BackgroundSource,
};
use crate::config::DiffexpConfig;
use crate::detect::{detect_dataset, DetectOptions, DetectionResult, Variant};
use crate::error::{Error, Result};
use crate::gee::{fit_genes, FitStatus, GeneFitResult};
use crate::model::{ProbeLevelDataset, PM};

/// PM-only view for half-price fits; the full dataset otherwise.
pub fn source_view(dataset: &ProbeLevelDataset, source: BackgroundSource) -> Result<ProbeLevelDataset> {
    match source {
        BackgroundSource::Mismatch => Ok(dataset.clone()),
        BackgroundSource::HalfPrice => dataset.select_channels(&[PM]),
    }
}

pub fn fit_background_model(
    dataset: &ProbeLevelDataset,
    source: BackgroundSource,
    opts: &BackgroundOptions,
) -> Result<BackgroundFit> {
    fit_plugins(&source_view(dataset, source)?, source, None, opts)
}

/// Nonspecific half of the plug-in fit only, enough for presence calls.
pub fn fit_nonspecific(
    dataset: &ProbeLevelDataset,
    source: BackgroundSource,
    opts: &BackgroundOptions,
) -> Result<BackgroundFit> {
    let view = source_view(dataset, source)?;
    let affinity = fit_background_affinity(&view, source, opts)?;
    fit_background(&view, &affinity, source, opts)
}

/// Detection calls for one variant, fitting the background model it needs.
pub fn detect(
    dataset: &ProbeLevelDataset,
    variant: Variant,
    background: &BackgroundOptions,
    opts: &DetectOptions,
) -> Result<Vec<DetectionResult>> {
    let source = match variant {
        Variant::Mas5 => return detect_dataset(dataset, variant, None, opts),
        Variant::ModelPmMm => BackgroundSource::Mismatch,
        Variant::ModelHalfPrice => BackgroundSource::HalfPrice,
    };
    let fit = fit_nonspecific(dataset, source, background)?;
    detect_dataset(&source_view(dataset, source)?, variant, Some(&fit), opts)
}

/// Keeps the arrays of two conditions, relabelled 0 (reference) and 1.
///
/// Without explicit conditions the dataset must hold exactly two, and the
/// smaller label becomes the reference.
pub fn two_condition_view(dataset: &ProbeLevelDataset, conditions: Option<[u32; 2]>) -> Result<ProbeLevelDataset> {
    let [a, b] = match conditions {
        Some(c) => c,
        None => {
            let present: BTreeSet<u32> = dataset.arrays().iter().map(|a| a.condition).collect();
            let v: Vec<u32> = present.into_iter().collect();
            match v.as_slice() {
                [a, b] => [*a, *b],
                _ => {
                    return Err(Error::Config(format!(
                        "dataset has {} conditions; set diffexp.conditions",
                        v.len()
                    )))
                }
            }
        }
    };
    let arrays: Vec<usize> = (0..dataset.n_arrays())
        .filter(|&i| [a, b].contains(&dataset.arrays()[i].condition))
        .collect();
    for c in [a, b] {
        if !arrays.iter().any(|&i| dataset.arrays()[i].condition == c) {
            return Err(Error::InvalidDataset(format!("no arrays in condition {c}")));
        }
    }
    dataset.select_arrays(&arrays, |c| u32::from(c == b))
}

#[derive(Debug, Clone)]
pub struct DiffexpOutput {
    /// The two-condition dataset that was fitted.
    pub dataset: ProbeLevelDataset,
    pub fit: BackgroundFit,
    pub results: Vec<GeneFitResult>,
}

/// Plug-in fit, per-gene GEE and, when requested, a second pass after
/// estimating the per-condition offsets from the first.
pub fn diffexp(
    dataset: &ProbeLevelDataset,
    cfg: &DiffexpConfig,
    background: &BackgroundOptions,
) -> Result<DiffexpOutput> {
    cfg.gee.validate()?;
    let view = source_view(&two_condition_view(dataset, cfg.conditions)?, cfg.source)?;
    let mut fit = fit_plugins(&view, cfg.source, None, background)?;
    let with_background = !cfg.no_background;
    let mut results = fit_genes(&view, &fit, &cfg.gee, with_background)?;
    if cfg.estimate_nu {
        let beta1: Vec<Option<f64>> = results
            .iter()
            .map(|r| (r.status == FitStatus::Converged).then_some(r.beta1))
            .collect();
        let se: Vec<f64> = results.iter().map(|r| r.se_beta1).collect();
        let conditions: Vec<u32> = view.arrays().iter().map(|a| a.condition).collect();
        fit.nu = estimate_nu(&beta1, &se, &conditions)?;
        results = fit_genes(&view, &fit, &cfg.gee, with_background)?;
    }
    Ok(DiffexpOutput {
        dataset: view,
        fit,
        results,
    })
}
