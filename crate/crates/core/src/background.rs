//! Plug-in estimates for the additive background and signal model.
//!
//! The background half fixes the optical floor, a per-array loess curve of
//! log background against sequence affinity, and the spread and cross-array
//! correlation of the nonspecific term. The signal half uses a stratum of
//! highly expressed probesets to estimate the probe effects and the spread
//! and correlation of the specific term. Normalization offsets come from
//! per-gene fold-change estimates through [`estimate_nu`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{fit_affinity, AffinityDesign, AffinityModel, DEFAULT_DF};
use crate::error::{Error, Result};
use crate::model::{NoiseParams, ProbeLevelDataset, MM, PM};
use crate::numeric::{loess_fit, mean, quantile, sample_variance, weighted_least_squares, Matrix, SmoothFit};

pub const RHO_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundOptions {
    pub span: f64,
    /// Smallest background-subtracted intensity before taking logs.
    pub floor: f64,
    pub df: usize,
    pub min_background_probes: usize,
    /// Fraction of probesets (by mean log intensity) forming the signal stratum.
    pub signal_fraction: f64,
    pub min_signal_genes: usize,
    /// Raw-intensity quantile below which PM probes train the PM-only background.
    pub half_price_quantile: f64,
}

impl Default for BackgroundOptions {
    fn default() -> Self {
        BackgroundOptions {
            span: 0.4,
            floor: 0.5,
            df: DEFAULT_DF,
            min_background_probes: 50,
            signal_fraction: 0.1,
            min_signal_genes: 20,
            half_price_quantile: 0.25,
        }
    }
}

impl BackgroundOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(Error::Config(format!("span {} not in (0, 1]", self.span)));
        }
        if !(self.floor > 0.0) {
            return Err(Error::Config("floor must be positive".into()));
        }
        if !(self.signal_fraction > 0.0 && self.signal_fraction <= 1.0) {
            return Err(Error::Config("signal_fraction must lie in (0, 1]".into()));
        }
        if !(self.half_price_quantile > 0.0 && self.half_price_quantile <= 1.0) {
            return Err(Error::Config("half_price_quantile must lie in (0, 1]".into()));
        }
        if self.df < 3 {
            return Err(Error::Config("df must be at least 3".into()));
        }
        Ok(())
    }
}

/// Which probes train the background curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundSource {
    /// Every MM probe.
    Mismatch,
    /// The lowest-intensity PM probes, for designs without MM probes.
    HalfPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFit {
    pub sigma_s: f64,
    pub rho_s: f64,
    pub sigma_s0_sq: f64,
    /// Predicted probe effect per flat probe, mean zero over probes.
    pub phi: Vec<f64>,
    /// Affinity coefficients of the probe effect (intercept set by centring).
    pub phi_coefficients: Vec<f64>,
    pub signal_genes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundFit {
    pub source: BackgroundSource,
    pub optical: Vec<f64>,
    pub affinity: AffinityModel,
    /// Per-array curve of log background against affinity.
    pub curves: Vec<SmoothFit>,
    pub n_arrays: usize,
    /// Predicted log background of each PM probe, `[probe * n_arrays + array]`.
    pub mu: Vec<f64>,
    pub sigma_n: f64,
    pub rho_n: f64,
    pub sigma_n0_sq: f64,
    /// Flat indices of the probes judged to carry background only.
    pub background_probes: Vec<usize>,
    pub signal: Option<SignalFit>,
    /// Normalization offset per array, mean zero.
    pub nu: Vec<f64>,
}

impl BackgroundFit {
    pub fn mu(&self, p: usize, i: usize) -> f64 {
        self.mu[p * self.n_arrays + i]
    }

    pub fn signal(&self) -> Result<&SignalFit> {
        self.signal
            .as_ref()
            .ok_or_else(|| Error::NoBackgroundModel("signal parameters have not been fitted".into()))
    }

    pub fn noise(&self) -> Result<NoiseParams> {
        let s = self.signal()?;
        Ok(NoiseParams {
            sigma_n: self.sigma_n,
            rho_n: self.rho_n,
            sigma_s: s.sigma_s,
            rho_s: s.rho_s,
        })
    }

    /// Checks that the fit belongs to a dataset of this shape.
    pub fn check_dataset(&self, dataset: &ProbeLevelDataset) -> Result<()> {
        if self.n_arrays != dataset.n_arrays() || self.mu.len() != dataset.n_probes() * dataset.n_arrays() {
            return Err(Error::DimensionMismatch(
                "background fit does not match the dataset".into(),
            ));
        }
        if let Some(s) = &self.signal {
            if s.phi.len() != dataset.n_probes() {
                return Err(Error::DimensionMismatch(
                    "probe effects do not match the dataset".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `1 - s0 / s`, clamped to `[0, 0.999]`.
pub fn correlation_from_variances(total: f64, within: f64) -> f64 {
    if !(total > 0.0) {
        return 0.0;
    }
    (1.0 - within / total).clamp(0.0, RHO_MAX)
}

/// Minimum intensity over every probe and channel of array `i`.
pub fn estimate_optical(dataset: &ProbeLevelDataset, i: usize) -> Result<f64> {
    if i >= dataset.n_arrays() {
        return Err(Error::EmptyArray(i));
    }
    dataset
        .array_values(i)
        .min_by(f64::total_cmp)
        .ok_or(Error::EmptyArray(i))
}

fn log_floor(y: f64, floor: f64) -> f64 {
    y.max(floor).ln()
}

fn optical_all(dataset: &ProbeLevelDataset) -> Result<Vec<f64>> {
    (0..dataset.n_arrays()).map(|i| estimate_optical(dataset, i)).collect()
}

/// Mean over arrays of `log(max(Y - O, floor))` for each probe on channel `h`.
fn mean_log_by_probe(dataset: &ProbeLevelDataset, optical: &[f64], h: usize, floor: f64) -> Vec<f64> {
    let n = dataset.n_arrays() as f64;
    (0..dataset.n_probes())
        .map(|p| {
            (0..dataset.n_arrays())
                .map(|i| log_floor(dataset.value(p, i, h) - optical[i], floor))
                .sum::<f64>()
                / n
        })
        .collect()
}

fn sequences(dataset: &ProbeLevelDataset, h: usize, probes: &[usize]) -> Vec<String> {
    probes.iter().map(|&p| dataset.probe(p).sequences[h].clone()).collect()
}

/// PM probes whose mean raw intensity lies at or below the configured quantile.
pub fn half_price_training_probes(dataset: &ProbeLevelDataset, opts: &BackgroundOptions) -> Result<Vec<usize>> {
    let pm = dataset.require_channel(PM)?;
    let raw: Vec<f64> = (0..dataset.n_probes())
        .map(|p| (0..dataset.n_arrays()).map(|i| dataset.value(p, i, pm)).sum::<f64>())
        .collect();
    let cut = quantile(&raw, opts.half_price_quantile);
    Ok((0..dataset.n_probes()).filter(|&p| raw[p] <= cut).collect())
}

/// Affinity model of the log background, trained on MM probes or, for
/// [`BackgroundSource::HalfPrice`], on the lowest-intensity PM probes.
pub fn fit_background_affinity(
    dataset: &ProbeLevelDataset,
    source: BackgroundSource,
    opts: &BackgroundOptions,
) -> Result<AffinityModel> {
    opts.validate()?;
    let optical = optical_all(dataset)?;
    let (h, probes) = match source {
        BackgroundSource::Mismatch => (dataset.require_channel(MM)?, (0..dataset.n_probes()).collect()),
        BackgroundSource::HalfPrice => (dataset.require_channel(PM)?, half_price_training_probes(dataset, opts)?),
    };
    let response = mean_log_by_probe(dataset, &optical, h, opts.floor);
    let y: Vec<f64> = probes.iter().map(|&p| response[p]).collect();
    fit_affinity(&sequences(dataset, h, &probes), &y, opts.df)
}

/// Background half of the plug-in fit.
///
/// The per-array curve maps affinity to `log(max(Y - O, floor))` of the
/// training probes; its residual variance gives `sigma_N^2`. PM probes whose
/// mean residual across arrays is negative are treated as background, and
/// the mean of their cross-array residual variances gives `sigma_N0^2`.
pub fn fit_background(
    dataset: &ProbeLevelDataset,
    affinity: &AffinityModel,
    source: BackgroundSource,
    opts: &BackgroundOptions,
) -> Result<BackgroundFit> {
    opts.validate()?;
    let n_arrays = dataset.n_arrays();
    let pm = dataset.require_channel(PM)?;
    let optical = optical_all(dataset)?;
    let (h_train, train) = match source {
        BackgroundSource::Mismatch => (
            dataset.require_channel(MM)?,
            (0..dataset.n_probes()).collect::<Vec<_>>(),
        ),
        BackgroundSource::HalfPrice => (pm, half_price_training_probes(dataset, opts)?),
    };
    let alpha_train: Vec<f64> = train
        .iter()
        .map(|&p| affinity.predict(&dataset.probe(p).sequences[h_train]))
        .collect::<Result<_>>()?;
    let alpha_pm: Vec<f64> = (0..dataset.n_probes())
        .map(|p| affinity.predict(&dataset.probe(p).sequences[pm]))
        .collect::<Result<_>>()?;

    let per_array: Vec<(SmoothFit, f64, usize)> = (0..n_arrays)
        .into_par_iter()
        .map(|i| {
            let y: Vec<f64> = train
                .iter()
                .map(|&p| log_floor(dataset.value(p, i, h_train) - optical[i], opts.floor))
                .collect();
            let curve = loess_fit(&alpha_train, &y, opts.span)?;
            let ss: f64 = alpha_train
                .iter()
                .zip(&y)
                .map(|(a, v)| (v - curve.eval(*a)).powi(2))
                .sum();
            Ok((curve, ss, y.len()))
        })
        .collect::<Result<_>>()?;
    let (ss, n): (f64, usize) = per_array.iter().fold((0.0, 0), |(s, c), r| (s + r.1, c + r.2));
    let sigma_n_sq = ss / (n as f64 - 1.0);
    let curves: Vec<SmoothFit> = per_array.into_iter().map(|r| r.0).collect();

    let mut mu = vec![0.0; dataset.n_probes() * n_arrays];
    for (p, a) in alpha_pm.iter().enumerate() {
        for (i, c) in curves.iter().enumerate() {
            mu[p * n_arrays + i] = c.eval(*a);
        }
    }

    let mut background_probes = Vec::new();
    let mut within = 0.0;
    let mut resid = vec![0.0; n_arrays];
    for p in 0..dataset.n_probes() {
        for (i, r) in resid.iter_mut().enumerate() {
            *r = log_floor(dataset.value(p, i, pm) - optical[i], opts.floor) - mu[p * n_arrays + i];
        }
        if mean(&resid) < 0.0 {
            background_probes.push(p);
            if n_arrays > 1 {
                within += sample_variance(&resid);
            }
        }
    }
    if background_probes.len() < opts.min_background_probes {
        return Err(Error::InsufficientBackgroundProbes {
            needed: opts.min_background_probes,
            got: background_probes.len(),
        });
    }
    let sigma_n0_sq = if n_arrays > 1 {
        within / background_probes.len() as f64
    } else {
        sigma_n_sq
    };
    Ok(BackgroundFit {
        source,
        optical,
        affinity: affinity.clone(),
        curves,
        n_arrays,
        mu,
        sigma_n: sigma_n_sq.sqrt().max(f64::MIN_POSITIVE),
        rho_n: correlation_from_variances(sigma_n_sq, sigma_n0_sq),
        sigma_n0_sq,
        background_probes,
        signal: None,
        nu: vec![0.0; n_arrays],
    })
}

/// Signal half of the plug-in fit.
///
/// The stratum is the top `signal_fraction` of probesets by mean log PM. On
/// it, `r = log(max(Y - O - E[N], floor))` is centred within each gene and
/// array and regressed on the gene-centred affinity design to predict the
/// probe effect of every probe. The residuals give `sigma_S^2` (pooled
/// across-probe variance) and `sigma_S0^2` (mean cross-array variance,
/// rescaled for the within-array centring).
pub fn fit_signal_params(
    dataset: &ProbeLevelDataset,
    mut fit: BackgroundFit,
    opts: &BackgroundOptions,
) -> Result<BackgroundFit> {
    opts.validate()?;
    fit.check_dataset(dataset)?;
    let pm = dataset.require_channel(PM)?;
    let n_arrays = dataset.n_arrays();
    let half_var_n = 0.5 * fit.sigma_n * fit.sigma_n;

    let gene_level: Vec<f64> = (0..dataset.n_genes())
        .map(|g| {
            let r = dataset.probe_range(g);
            let n = (r.len() * n_arrays) as f64;
            r.flat_map(|p| (0..n_arrays).map(move |i| (p, i)))
                .map(|(p, i)| log_floor(dataset.value(p, i, pm) - fit.optical[i], opts.floor))
                .sum::<f64>()
                / n
        })
        .collect();
    let mut order: Vec<usize> = (0..dataset.n_genes())
        .filter(|&g| dataset.n_probes_of(g) >= 2)
        .collect();
    order.sort_by(|&a, &b| gene_level[b].total_cmp(&gene_level[a]).then(a.cmp(&b)));
    let take = ((opts.signal_fraction * dataset.n_genes() as f64).ceil() as usize).min(order.len());
    if take < opts.min_signal_genes {
        return Err(Error::NoSignalStratum(format!(
            "{take} high-expression probesets, need {}",
            opts.min_signal_genes
        )));
    }
    let mut stratum: Vec<usize> = order[..take].to_vec();
    stratum.sort_unstable();

    let design = AffinityDesign::new(fit.affinity.df(), fit.affinity.probe_length())?;
    let k = design.n_params() - 1;
    let rows_of = |p: usize| -> Result<Vec<f64>> { Ok(design.row(&dataset.probe(p).sequences[pm])?[1..].to_vec()) };

    // r[g][j][i]
    let mut r_all: Vec<Vec<Vec<f64>>> = Vec::with_capacity(stratum.len());
    let mut x = Matrix::zeros(0, k);
    let mut response = Vec::new();
    for &g in &stratum {
        let probes: Vec<usize> = dataset.probe_range(g).collect();
        let r: Vec<Vec<f64>> = probes
            .iter()
            .map(|&p| {
                (0..n_arrays)
                    .map(|i| {
                        let bg = (fit.mu(p, i) + half_var_n).exp();
                        log_floor(dataset.value(p, i, pm) - fit.optical[i] - bg, opts.floor)
                    })
                    .collect()
            })
            .collect();
        let rows: Vec<Vec<f64>> = probes.iter().map(|&p| rows_of(p)).collect::<Result<_>>()?;
        let nj = probes.len() as f64;
        let row_mean: Vec<f64> = (0..k).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / nj).collect();
        for i in 0..n_arrays {
            let m = r.iter().map(|v| v[i]).sum::<f64>() / nj;
            for (j, row) in rows.iter().enumerate() {
                let centred: Vec<f64> = row.iter().zip(&row_mean).map(|(a, b)| a - b).collect();
                x.push_row(&centred)?;
                response.push(r[j][i] - m);
            }
        }
        r_all.push(r);
    }
    let b = weighted_least_squares(&x, &response, &vec![1.0; response.len()])?;

    let mut phi: Vec<f64> = (0..dataset.n_probes())
        .map(|p| Ok(rows_of(p)?.iter().zip(&b).map(|(a, c)| a * c).sum()))
        .collect::<Result<_>>()?;
    let centre = mean(&phi);
    phi.iter_mut().for_each(|v| *v -= centre);
    let mut phi_coefficients = vec![-centre];
    phi_coefficients.extend(&b);

    let (mut ss, mut dof) = (0.0, 0.0);
    let (mut cross, mut n_cross) = (0.0, 0usize);
    for (&g, r) in stratum.iter().zip(&r_all) {
        let probes: Vec<usize> = dataset.probe_range(g).collect();
        let nj = probes.len() as f64;
        // e[j][i]
        let mut e = vec![vec![0.0; n_arrays]; probes.len()];
        for i in 0..n_arrays {
            let m = probes.iter().enumerate().map(|(j, &p)| r[j][i] - phi[p]).sum::<f64>() / nj;
            for (j, &p) in probes.iter().enumerate() {
                e[j][i] = r[j][i] - phi[p] - m;
                ss += e[j][i] * e[j][i];
            }
            dof += nj - 1.0;
        }
        if n_arrays > 1 {
            for ej in &e {
                cross += sample_variance(ej) * nj / (nj - 1.0);
                n_cross += 1;
            }
        }
    }
    let sigma_s_sq = ss / dof;
    let sigma_s0_sq = if n_cross > 0 {
        cross / n_cross as f64
    } else {
        sigma_s_sq
    };
    fit.signal = Some(SignalFit {
        sigma_s: sigma_s_sq.sqrt().max(f64::MIN_POSITIVE),
        rho_s: correlation_from_variances(sigma_s_sq, sigma_s0_sq),
        sigma_s0_sq,
        phi,
        phi_coefficients,
        signal_genes: stratum,
    });
    Ok(fit)
}

/// Minimum number of usable genes for [`estimate_nu`].
pub const MIN_NU_GENES: usize = 10;

/// Condition-level normalization offsets for a two-group design.
///
/// `m` is the inverse-variance weighted mean of the usable `beta1` (finite
/// estimate, finite positive standard error). Condition 0 arrays get
/// `-m n1 / I` and condition 1 arrays `m n0 / I`, so the offsets differ by
/// `m` and average to zero over arrays.
pub fn estimate_nu(beta1: &[Option<f64>], se: &[f64], conditions: &[u32]) -> Result<Vec<f64>> {
    if beta1.len() != se.len() {
        return Err(Error::DimensionMismatch(
            "beta1 and standard errors differ in length".into(),
        ));
    }
    if conditions.iter().any(|&c| c > 1) {
        return Err(Error::InvalidParameter(
            "normalization offsets need conditions 0 and 1".into(),
        ));
    }
    let (mut sw, mut swb, mut used) = (0.0, 0.0, 0usize);
    for (b, s) in beta1.iter().zip(se) {
        if let Some(b) = b {
            if b.is_finite() && s.is_finite() && *s > 0.0 {
                let w = 1.0 / (s * s);
                sw += w;
                swb += w * b;
                used += 1;
            }
        }
    }
    if used < MIN_NU_GENES || !(sw > 0.0) {
        return Err(Error::NoUsableGenes);
    }
    let m = swb / sw;
    let total = conditions.len() as f64;
    let n1 = conditions.iter().filter(|&&c| c == 1).count() as f64;
    let n0 = total - n1;
    Ok(conditions
        .iter()
        .map(|&c| if c == 1 { m * n0 / total } else { -m * n1 / total })
        .collect())
}

/// Both halves of the plug-in fit, with the background affinity trained
/// from the data unless `affinity` is supplied.
pub fn fit_plugins(
    dataset: &ProbeLevelDataset,
    source: BackgroundSource,
    affinity: Option<&AffinityModel>,
    opts: &BackgroundOptions,
) -> Result<BackgroundFit> {
    let trained;
    let affinity = match affinity {
        Some(a) => a,
        None => {
            trained = fit_background_affinity(dataset, source, opts)?;
            &trained
        }
    };
    let bg = fit_background(dataset, affinity, source, opts)?;
    fit_signal_params(dataset, bg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArrayMeta, Probe, ProbeSet};
    use crate::sim::{generate, SimConfig, SpikeInDesign};

    #[test]
    fn optical_is_array_minimum() {
        let genes = vec![ProbeSet {
            gene_id: "g".into(),
            probes: vec![Probe {
                index: 1,
                sequences: vec!["A".into()],
            }],
        }];
        let arrays = (0..3)
            .map(|i| ArrayMeta {
                id: format!("a{i}"),
                condition: 0,
            })
            .collect();
        let d = ProbeLevelDataset::new(genes, arrays, vec![PM.into()], vec![34.0, 100.0, 57.0]).unwrap();
        assert_eq!(estimate_optical(&d, 1).unwrap(), 100.0);
        assert!(matches!(estimate_optical(&d, 3), Err(Error::EmptyArray(3))));
    }

    #[test]
    fn correlation_formula_edges() {
        assert_eq!(correlation_from_variances(0.36, 0.36), 0.0);
        assert_eq!(correlation_from_variances(0.36, 0.0), RHO_MAX);
        assert!((correlation_from_variances(0.4, 0.1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn nu_absorbs_constant_shift() {
        let mut beta: Vec<Option<f64>> = (0..40).map(|k| Some(((k * 7) % 11) as f64 / 10.0 - 0.5)).collect();
        let se: Vec<f64> = (0..40).map(|k| 0.1 + (k % 5) as f64 * 0.05).collect();
        let conds = [0, 0, 0, 1, 1, 1];
        let base = estimate_nu(&beta, &se, &conds).unwrap();
        for b in beta.iter_mut() {
            *b = b.map(|v| v + 0.37);
        }
        let shifted = estimate_nu(&beta, &se, &conds).unwrap();
        assert!(((shifted[3] - shifted[0]) - (base[3] - base[0]) - 0.37).abs() < 1e-12);
        assert!(shifted.iter().sum::<f64>().abs() < 1e-12);
        // adjusted betas have weighted mean zero
        let m = shifted[3] - shifted[0];
        let (sw, swb) = beta.iter().zip(&se).fold((0.0, 0.0), |(a, b), (x, s)| {
            let w = 1.0 / (s * s);
            (a + w, b + w * (x.unwrap() - m))
        });
        assert!((swb / sw).abs() < 1e-12);
    }

    #[test]
    fn nu_symmetric_betas_give_zero() {
        let beta: Vec<Option<f64>> = (0..20).map(|k| Some(if k % 2 == 0 { 0.3 } else { -0.3 })).collect();
        let nu = estimate_nu(&beta, &[0.2; 20], &[0, 1, 0, 1]).unwrap();
        assert!(nu.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn nu_without_usable_genes() {
        let beta = vec![Some(0.1); 20];
        let se = vec![f64::INFINITY; 20];
        assert!(matches!(estimate_nu(&beta, &se, &[0, 1]), Err(Error::NoUsableGenes)));
    }

    fn recovery_data(seed: u64) -> ProbeLevelDataset {
        let design = SpikeInDesign::new(vec![0.0], vec![vec![0, 0]], 3).unwrap();
        let cfg = SimConfig {
            background_genes: 400,
            ..SimConfig::default()
        };
        generate(&design, &cfg, seed).unwrap().0
    }

    #[test]
    fn plugin_fit_is_sane_and_disjoint() {
        let d = recovery_data(11);
        let fit = fit_plugins(&d, BackgroundSource::Mismatch, None, &BackgroundOptions::default()).unwrap();
        let s = fit.signal().unwrap();
        assert!((0.0..=RHO_MAX).contains(&fit.rho_n));
        assert!((0.0..=RHO_MAX).contains(&s.rho_s));
        assert!(fit.sigma_n > 0.0 && s.sigma_s > 0.0);
        assert!(s.phi.iter().sum::<f64>().abs() < 1e-9);
        for &g in &s.signal_genes {
            for p in d.probe_range(g) {
                assert!(fit.background_probes.binary_search(&p).is_err());
            }
        }
    }

    #[test]
    fn half_price_needs_no_mm() {
        let d = recovery_data(12);
        let pm_only = d.select_channels(&[PM]).unwrap();
        let fit = fit_plugins(
            &pm_only,
            BackgroundSource::HalfPrice,
            None,
            &BackgroundOptions::default(),
        )
        .unwrap();
        assert_eq!(fit.source, BackgroundSource::HalfPrice);
        assert!(fit.sigma_n > 0.0);
    }

    #[test]
    fn json_round_trip() {
        let d = recovery_data(13);
        let fit = fit_plugins(&d, BackgroundSource::Mismatch, None, &BackgroundOptions::default()).unwrap();
        let s = serde_json::to_string(&fit).unwrap();
        let back: BackgroundFit = serde_json::from_str(&s).unwrap();
        assert_eq!(back.n_arrays, fit.n_arrays);
        assert_eq!(back.background_probes, fit.background_probes);
        assert!((back.sigma_n - fit.sigma_n).abs() < 1e-15);
    }
}
