//! Dead/alive screening of two-colour deletion-tag arrays.
//!
//! Each channel's log intensities are fitted with a two-component normal
//! mixture (dead = background only, alive = background plus signal). A tag
//! is scored by the likelihood ratio of "different components in the two
//! channels" against "the same component", and tags alive in both channels
//! get a background-corrected, channel-normalized log ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProbeLevelDataset, GREEN, RED};
use crate::numeric::normal::normal_ln_pdf;
use crate::numeric::{quantile_sorted, sample_variance};

pub const MIN_TAGS: usize = 200;
pub const MAX_EM_ITER: usize = 500;
pub const EM_TOL: f64 = 1e-8;
pub const MIN_COMPONENT_VAR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMixture {
    pub dead_mean: f64,
    pub dead_var: f64,
    pub alive_mean: f64,
    pub alive_var: f64,
    /// Weight of the alive component.
    pub alive_weight: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Log-likelihood after every EM iteration of the accepted run.
    pub trace: Vec<f64>,
}

impl ChannelMixture {
    /// Separation `sqrt(2) |m_a - m_d| / sqrt(v_a + v_d)` of at least 2 and
    /// an alive weight inside `[0.01, 0.99]`.
    pub fn is_bimodal(&self) -> bool {
        let d = std::f64::consts::SQRT_2 * (self.alive_mean - self.dead_mean).abs()
            / (self.alive_var + self.dead_var).sqrt();
        d >= 2.0 && (0.01..=0.99).contains(&self.alive_weight)
    }

    fn ln_dead(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.dead_mean, self.dead_var)
    }

    fn ln_alive(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.alive_mean, self.alive_var)
    }

    /// `E[N]` and `var(N)` on the intensity scale implied by the dead component.
    fn background_moments(&self) -> (f64, f64) {
        let m = (self.dead_mean + 0.5 * self.dead_var).exp();
        (m, m * m * self.dead_var.exp_m1())
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

struct EmStart {
    means: [f64; 2],
    var: f64,
}

fn run_em(x: &[f64], start: EmStart) -> std::result::Result<ChannelMixture, String> {
    let n = x.len() as f64;
    let [mut m0, mut m1] = start.means;
    let (mut v0, mut v1) = (start.var, start.var);
    let mut w: f64 = 0.5;
    let mut resp = vec![0.0; x.len()];
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for it in 1..=MAX_EM_ITER {
        let mut ll = 0.0;
        for (r, &v) in resp.iter_mut().zip(x) {
            let a = (1.0 - w).ln() + normal_ln_pdf(v, m0, v0);
            let b = w.ln() + normal_ln_pdf(v, m1, v1);
            let t = log_sum_exp(a, b);
            ll += t;
            *r = (b - t).exp();
        }
        trace.push(ll);
        if it > 1 && ll - prev < EM_TOL {
            let (mut dead, mut alive) = ((m0, v0), (m1, v1));
            let mut weight = w;
            if alive.0 < dead.0 {
                std::mem::swap(&mut dead, &mut alive);
                weight = 1.0 - w;
            }
            return Ok(ChannelMixture {
                dead_mean: dead.0,
                dead_var: dead.1,
                alive_mean: alive.0,
                alive_var: alive.1,
                alive_weight: weight,
                log_likelihood: ll,
                iterations: it,
                trace,
            });
        }
        prev = ll;
        let s1: f64 = resp.iter().sum();
        let s0 = n - s1;
        if s1 <= 0.0 || s0 <= 0.0 {
            return Err("a component lost all responsibility".into());
        }
        m1 = resp.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() / s1;
        m0 = resp.iter().zip(x).map(|(r, v)| (1.0 - r) * v).sum::<f64>() / s0;
        v1 = resp.iter().zip(x).map(|(r, v)| r * (v - m1) * (v - m1)).sum::<f64>() / s1;
        v0 = resp
            .iter()
            .zip(x)
            .map(|(r, v)| (1.0 - r) * (v - m0) * (v - m0))
            .sum::<f64>()
            / s0;
        w = s1 / n;
        if v0 < MIN_COMPONENT_VAR || v1 < MIN_COMPONENT_VAR {
            return Err(format!("component variance collapsed to {:.3e}", v0.min(v1)));
        }
    }
    Err(format!("no convergence in {MAX_EM_ITER} EM iterations"))
}

/// Two-component normal mixture by EM.
///
/// Starts from the 25th and 75th percentiles with a common variance; on a
/// collapse it restarts once from the 10th and 90th percentiles.
pub fn fit_mixture(values: &[f64]) -> Result<ChannelMixture> {
    if values.len() < MIN_TAGS {
        return Err(Error::InsufficientPoints {
            needed: MIN_TAGS,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("mixture input must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let var = (sample_variance(&sorted) / 4.0).max(1e-3);
    let q = |p| quantile_sorted(&sorted, p);
    match run_em(
        values,
        EmStart {
            means: [q(0.25), q(0.75)],
            var,
        },
    ) {
        Ok(fit) => Ok(fit),
        Err(first) => {
            log::warn!("mixture EM failed ({first}); restarting");
            run_em(
                values,
                EmStart {
                    means: [q(0.1), q(0.9)],
                    var,
                },
            )
            .map_err(Error::DegenerateMixture)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub red: ChannelMixture,
    pub green: ChannelMixture,
    /// Optical floor per channel (red, green).
    pub optical: [f64; 2],
    pub floor: f64,
    /// Variance of one probe's log ratio due to specific noise, from the
    /// between-probe spread of bright tags.
    pub probe_noise_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagClass {
    /// Dead in red, alive in green.
    DeadAlive,
    AliveDead,
    SameAlive,
    SameDead,
}

impl TagClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            TagClass::DeadAlive => "dead_alive",
            TagClass::AliveDead => "alive_dead",
            TagClass::SameAlive => "same_alive",
            TagClass::SameDead => "same_dead",
        }
    }

    pub fn parse(s: &str) -> Option<TagClass> {
        [
            TagClass::DeadAlive,
            TagClass::AliveDead,
            TagClass::SameAlive,
            TagClass::SameDead,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagResult {
    pub tag_id: String,
    pub llr: f64,
    pub class: TagClass,
    /// Estimate of `log theta_G - log theta_R`, for tags alive in both channels.
    pub log_ratio: Option<f64>,
    /// Unweighted background-subtracted log difference without channel normalization.
    pub raw_log_ratio: f64,
}

/// Per-probe observations of one tag: `(red, green)` intensities.
pub type TagObservations = [(f64, f64)];

fn to_logs(fit: &MixtureFit, obs: &TagObservations) -> Vec<(f64, f64)> {
    obs.iter()
        .map(|&(r, g)| {
            (
                (r - fit.optical[0]).max(fit.floor).ln(),
                (g - fit.optical[1]).max(fit.floor).ln(),
            )
        })
        .collect()
}

/// How the component assignment enters each hypothesis' likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlrMode {
    /// Best assignment under each hypothesis.
    #[default]
    Profile,
    /// Equal-weight average over the two assignments of each hypothesis.
    Marginal,
}

/// Likelihood ratio of different against same mixture components.
///
/// Returns `(llr, class)`; `llr > threshold` classifies the tag by the
/// better cross assignment, otherwise by the better same assignment.
pub fn dead_alive_llr(
    obs: &TagObservations,
    fit: &MixtureFit,
    threshold: f64,
    mode: LlrMode,
) -> Result<(f64, TagClass)> {
    if obs.is_empty() {
        return Err(Error::NoTagData("tag has no probes".into()));
    }
    let (mut da, mut ad, mut dd, mut aa) = (0.0, 0.0, 0.0, 0.0);
    for (r, g) in to_logs(fit, obs) {
        let (rd, ra) = (fit.red.ln_dead(r), fit.red.ln_alive(r));
        let (gd, ga) = (fit.green.ln_dead(g), fit.green.ln_alive(g));
        da += rd + ga;
        ad += ra + gd;
        dd += rd + gd;
        aa += ra + ga;
    }
    let llr = match mode {
        LlrMode::Profile => da.max(ad) - dd.max(aa),
        LlrMode::Marginal => log_sum_exp(da, ad) - log_sum_exp(dd, aa),
    };
    let class = if llr > threshold {
        if da >= ad {
            TagClass::DeadAlive
        } else {
            TagClass::AliveDead
        }
    } else if aa >= dd {
        TagClass::SameAlive
    } else {
        TagClass::SameDead
    };
    Ok((llr, class))
}

/// Unweighted mean over probes of the background-subtracted log difference,
/// with no channel normalization.
pub fn raw_log_ratio(obs: &TagObservations, fit: &MixtureFit) -> f64 {
    obs.iter().map(|&pair| corrected_difference(fit, pair).0).sum::<f64>() / obs.len() as f64
}

/// Background-corrected log ratio `log theta_G - log theta_R`.
///
/// Each channel subtracts `E[N]` implied by its dead component before
/// logging; probes are combined with delta-method precision weights
/// `(Y - O - E[N])^2 / var(N)`, and the difference of the alive-component
/// means removes the channel bias.
pub fn log_ratio_mle(obs: &TagObservations, fit: &MixtureFit, class: TagClass) -> Result<f64> {
    if class != TagClass::SameAlive {
        return Err(Error::NotApplicable(format!(
            "log ratio needs a tag alive in both channels, got {}",
            class.as_str()
        )));
    }
    if obs.is_empty() {
        return Err(Error::NoTagData("tag has no probes".into()));
    }
    let (mut sw, mut swd) = (0.0, 0.0);
    for &pair in obs {
        let (d, bg_var) = corrected_difference(fit, pair);
        let w = 1.0 / (fit.probe_noise_var + bg_var).max(f64::MIN_POSITIVE);
        sw += w;
        swd += w * d;
    }
    Ok(swd / sw - (fit.green.alive_mean - fit.red.alive_mean))
}

/// Background-corrected `log(G) - log(R)` of one probe and its delta-method
/// variance from the nonspecific component.
fn corrected_difference(fit: &MixtureFit, (r, g): (f64, f64)) -> (f64, f64) {
    let (bg_r, var_r) = fit.red.background_moments();
    let (bg_g, var_g) = fit.green.background_moments();
    let sr = (r - fit.optical[0] - bg_r).max(fit.floor);
    let sg = (g - fit.optical[1] - bg_g).max(fit.floor);
    (sg.ln() - sr.ln(), var_r / (sr * sr) + var_g / (sg * sg))
}

/// Median of a chi-square variable with one degree of freedom.
const CHI2_1_MEDIAN: f64 = 0.454_936_423_119_572_8;
const MIN_NOISE_TAGS: usize = 10;

/// Robust per-probe log-ratio noise from tags whose probes all lie above
/// both alive means; zero when too few such tags exist.
fn probe_noise_var(fit: &MixtureFit, tags: &[Vec<(f64, f64)>]) -> f64 {
    let bright = |&(r, g): &(f64, f64)| {
        (r - fit.optical[0]).max(fit.floor).ln() > fit.red.alive_mean
            && (g - fit.optical[1]).max(fit.floor).ln() > fit.green.alive_mean
    };
    let mut half_sq: Vec<f64> = tags
        .iter()
        .filter(|obs| obs.len() >= 2 && obs[..2].iter().all(bright))
        .map(|obs| {
            let diff = corrected_difference(fit, obs[0]).0 - corrected_difference(fit, obs[1]).0;
            0.5 * diff * diff
        })
        .collect();
    if half_sq.len() < MIN_NOISE_TAGS {
        log::warn!(
            "only {} bright two-probe tags; probe weights use background variance only",
            half_sq.len()
        );
        return 0.0;
    }
    half_sq.sort_by(f64::total_cmp);
    quantile_sorted(&half_sq, 0.5) / CHI2_1_MEDIAN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagScreenOptions {
    pub llr_threshold: f64,
    pub floor: f64,
    pub llr_mode: LlrMode,
}

impl Default for TagScreenOptions {
    fn default() -> Self {
        TagScreenOptions {
            llr_threshold: 0.0,
            floor: 0.5,
            llr_mode: LlrMode::Profile,
        }
    }
}

fn tag_observations(dataset: &ProbeLevelDataset, g: usize, r: usize, gr: usize) -> Vec<(f64, f64)> {
    dataset
        .probe_range(g)
        .map(|p| (dataset.value(p, 0, r), dataset.value(p, 0, gr)))
        .collect()
}

/// Fits the per-channel mixtures of a one-array R/G dataset.
pub fn fit_tag_mixture(dataset: &ProbeLevelDataset, opts: &TagScreenOptions) -> Result<MixtureFit> {
    let r = dataset.require_channel(RED)?;
    let g = dataset.require_channel(GREEN)?;
    if dataset.n_arrays() != 1 {
        return Err(Error::InvalidDataset(format!(
            "tag screening expects one array, found {}",
            dataset.n_arrays()
        )));
    }
    if !(opts.floor > 0.0) {
        return Err(Error::Config("floor must be positive".into()));
    }
    let min = |h: usize| {
        (0..dataset.n_probes())
            .map(|p| dataset.value(p, 0, h))
            .fold(f64::INFINITY, f64::min)
    };
    let optical = [min(r), min(g)];
    let logs = |h: usize, o: f64| -> Vec<f64> {
        (0..dataset.n_probes())
            .map(|p| (dataset.value(p, 0, h) - o).max(opts.floor).ln())
            .collect()
    };
    let mut fit = MixtureFit {
        red: fit_mixture(&logs(r, optical[0]))?,
        green: fit_mixture(&logs(g, optical[1]))?,
        optical,
        floor: opts.floor,
        probe_noise_var: 0.0,
    };
    let tags: Vec<_> = (0..dataset.n_genes())
        .map(|t| tag_observations(dataset, t, r, g))
        .collect();
    fit.probe_noise_var = probe_noise_var(&fit, &tags);
    Ok(fit)
}

/// Mixture fit and per-tag results for every gene of the dataset.
pub fn screen_tags(dataset: &ProbeLevelDataset, opts: &TagScreenOptions) -> Result<(MixtureFit, Vec<TagResult>)> {
    let fit = fit_tag_mixture(dataset, opts)?;
    let r = dataset.require_channel(RED)?;
    let g = dataset.require_channel(GREEN)?;
    let results = (0..dataset.n_genes())
        .map(|t| {
            let obs = tag_observations(dataset, t, r, g);
            let (llr, class) = dead_alive_llr(&obs, &fit, opts.llr_threshold, opts.llr_mode)?;
            let log_ratio = match class {
                TagClass::SameAlive => Some(log_ratio_mle(&obs, &fit, class)?),
                _ => None,
            };
            Ok(TagResult {
                tag_id: dataset.genes()[t].gene_id.clone(),
                llr,
                class,
                log_ratio,
                raw_log_ratio: raw_log_ratio(&obs, &fit),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((fit, results))
}
