use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::design::SpikeInDesign;
use crate::affinity::AffinityModel;
use crate::error::{Error, Result};
use crate::model::{ArrayMeta, ModelParams, NoiseParams, Probe, ProbeLevelDataset, ProbeSet, MM, PM};

/// Position (1-based) whose base is complemented to form the mismatch probe.
pub const MISMATCH_POSITION: usize = 13;

/// Nonspecific affinity used by the default simulator; the mean log
/// background over uniformly random 25-mers is close to `ln 60`.
pub fn default_nonspecific_affinity() -> AffinityModel {
    AffinityModel::from_coefficients(
        3.0,
        vec![
            vec![-0.01, -0.03, -0.05, -0.04, -0.01],
            vec![0.04, 0.08, 0.11, 0.08, 0.03],
            vec![0.06, 0.12, 0.16, 0.12, 0.04],
        ],
        25,
    )
    .expect("static coefficients")
}

/// Probe effect used by the default simulator, centred so that its mean
/// over uniformly random sequences is zero.
pub fn default_probe_effect() -> AffinityModel {
    let coef = vec![
        vec![0.02, 0.04, 0.05, 0.03, 0.00],
        vec![-0.02, -0.05, -0.06, -0.04, -0.01],
        vec![0.03, -0.02, -0.07, -0.03, 0.02],
    ];
    let uncentred = AffinityModel::from_coefficients(0.0, coef.clone(), 25).expect("static");
    let mean: f64 = (1..=25)
        .map(|pos| {
            ['A', 'C', 'G']
                .iter()
                .map(|&b| uncentred.base_effect(b, pos))
                .sum::<f64>()
                / 4.0
        })
        .sum();
    AffinityModel::from_coefficients(-mean, coef, 25).expect("static")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub probes_per_gene: usize,
    pub probe_length: usize,
    pub noise: NoiseParams,
    /// Optical floor, identical on every array.
    pub optical: f64,
    pub include_mm: bool,
    /// Specific intensity per picomolar at zero probe effect.
    pub signal_per_pm: f64,
    /// Spread of the per-gene log offset added to spiked concentrations.
    pub gene_offset_sd: f64,
    /// Unspiked genes whose level is the same on every array.
    pub background_genes: usize,
    pub background_present_fraction: f64,
    /// Uniform range of the log signal of present unspiked genes.
    pub background_log_signal: [f64; 2],
    /// Normalization constant for arrays of condition `k` (0 when absent).
    pub nu_by_condition: Vec<f64>,
    pub nonspecific_affinity: AffinityModel,
    pub probe_effect: AffinityModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            probes_per_gene: 16,
            probe_length: 25,
            noise: NoiseParams::default(),
            optical: 30.0,
            include_mm: true,
            signal_per_pm: 40.0,
            gene_offset_sd: 0.2,
            background_genes: 0,
            background_present_fraction: 0.5,
            background_log_signal: [3.0, 10.0],
            nu_by_condition: Vec::new(),
            nonspecific_affinity: default_nonspecific_affinity(),
            probe_effect: default_probe_effect(),
        }
    }
}

/// What the generator knows and the estimators do not.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub params: ModelParams,
    pub spiked: Vec<bool>,
    /// Spike concentration per gene and array (pM); `None` for unspiked genes.
    pub concentration: Vec<Option<Vec<f64>>>,
    /// Specific signal present on the PM channel, `[gene][array]`.
    pub present: Vec<Vec<bool>>,
    /// `theta(condition 1) - theta(condition 0)` when the dataset has exactly
    /// conditions {0, 1} and the gene is present in both.
    pub beta1: Vec<Option<f64>>,
}

impl GroundTruth {
    pub fn present_in_condition(&self, g: usize, arrays: &[usize]) -> bool {
        arrays.iter().any(|&i| self.present[g][i])
    }
}

/// Genes, arrays and channels of a dataset, without intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub genes: Vec<ProbeSet>,
    pub arrays: Vec<ArrayMeta>,
    pub channels: Vec<String>,
}

pub fn random_sequence<R: Rng>(rng: &mut R, length: usize) -> String {
    (0..length)
        .map(|_| ['A', 'C', 'G', 'T'][rng.random_range(0..4)])
        .collect()
}

/// Complements the middle base of a perfect-match probe.
pub fn mismatch_of(pm: &str) -> String {
    pm.char_indices()
        .map(|(k, c)| {
            if k + 1 == MISMATCH_POSITION {
                match c {
                    'A' => 'T',
                    'T' => 'A',
                    'C' => 'G',
                    'G' => 'C',
                    other => other,
                }
            } else {
                c
            }
        })
        .collect()
}

/// Exchangeable-correlation normal vector: `sigma (sqrt(rho) z0 + sqrt(1 - rho) z_i)`.
pub(crate) fn correlated_normals<R: Rng>(rng: &mut R, n: usize, sigma: f64, rho: f64, out: &mut Vec<f64>) {
    out.clear();
    let shared: f64 = rng.sample(StandardNormal);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        out.push(sigma * (a * shared + b * z));
    }
}

/// Draws `Y = O + exp(mu + xi) + exp(nu + phi + theta + eps)` for every
/// probe, array and channel of `skeleton`.
///
/// `xi` and `eps` are exchangeable across arrays within each probe and
/// channel. Every channel except MM draws an `eps` vector whether or not the
/// target is present, so presence changes do not shift the random stream.
pub fn generate_from_params<R: Rng>(
    params: &ModelParams,
    skeleton: &Skeleton,
    rng: &mut R,
) -> Result<ProbeLevelDataset> {
    params.noise.validate()?;
    let n_arrays = skeleton.arrays.len();
    let n_channels = skeleton.channels.len();
    if params.n_arrays() != n_arrays || params.n_channels() != n_channels || params.n_genes() != skeleton.genes.len() {
        return Err(Error::DimensionMismatch(
            "model parameters do not match the dataset skeleton".into(),
        ));
    }
    let signal_channel: Vec<bool> = skeleton.channels.iter().map(|c| c != MM).collect();
    let noise = params.noise;
    let n_probes: usize = skeleton.genes.iter().map(|g| g.probes.len()).sum();
    let mut data = vec![0.0; n_probes * n_arrays * n_channels];
    let (mut xi, mut eps) = (Vec::new(), Vec::new());
    let mut p = 0;
    for (g, gene) in skeleton.genes.iter().enumerate() {
        for _ in &gene.probes {
            for h in 0..n_channels {
                correlated_normals(rng, n_arrays, noise.sigma_n, noise.rho_n, &mut xi);
                if signal_channel[h] {
                    correlated_normals(rng, n_arrays, noise.sigma_s, noise.rho_s, &mut eps);
                }
                for i in 0..n_arrays {
                    let mut y = params.optical[i] + (params.mu[p][h] + xi[i]).exp();
                    if let Some(theta) = params.theta(g, i, h) {
                        let e = if signal_channel[h] { eps[i] } else { 0.0 };
                        y += (params.nu[i] + params.phi[p] + theta + e).exp();
                    }
                    data[(p * n_arrays + i) * n_channels + h] = y;
                }
            }
            p += 1;
        }
    }
    ProbeLevelDataset::new(
        skeleton.genes.clone(),
        skeleton.arrays.clone(),
        skeleton.channels.clone(),
        data,
    )
}

/// Builds a spike-in experiment from `design` and draws it with one seeded
/// stream. Spiked genes come first (`spike_01`, ...), followed by
/// `config.background_genes` unspiked genes. Array `m*_r*` belongs to
/// mixture `m`, which is also its condition label.
pub fn generate(design: &SpikeInDesign, config: &SimConfig, seed: u64) -> Result<(ProbeLevelDataset, GroundTruth)> {
    config.noise.validate()?;
    if config.probes_per_gene == 0 {
        return Err(Error::InvalidParameter("probes_per_gene must be positive".into()));
    }
    if config.nonspecific_affinity.probe_length() != config.probe_length
        || config.probe_effect.probe_length() != config.probe_length
    {
        return Err(Error::InvalidParameter(
            "simulator affinity models disagree with probe_length".into(),
        ));
    }
    let [lo, hi] = config.background_log_signal;
    if !(lo <= hi) || !(0.0..=1.0).contains(&config.background_present_fraction) {
        return Err(Error::InvalidParameter("invalid unspiked-gene settings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let channels: Vec<String> = if config.include_mm {
        vec![PM.to_string(), MM.to_string()]
    } else {
        vec![PM.to_string()]
    };
    let n_channels = channels.len();
    let mut arrays = Vec::new();
    for m in 0..design.n_mixtures() {
        for r in 0..design.replicates {
            arrays.push(ArrayMeta {
                id: format!("m{:02}_r{}", m + 1, r + 1),
                condition: m as u32,
            });
        }
    }
    let n_arrays = arrays.len();
    let mixture_of = |i: usize| i / design.replicates;

    let n_spiked = design.n_genes();
    let n_genes = n_spiked + config.background_genes;
    let mut genes = Vec::with_capacity(n_genes);
    let mut mu = Vec::new();
    let mut phi = Vec::new();
    for g in 0..n_genes {
        let gene_id = if g < n_spiked {
            format!("spike_{:02}", g + 1)
        } else {
            format!("gene_{:05}", g - n_spiked + 1)
        };
        let mut probes = Vec::with_capacity(config.probes_per_gene);
        for j in 0..config.probes_per_gene {
            let pm = random_sequence(&mut rng, config.probe_length);
            let mut sequences = vec![pm.clone()];
            if config.include_mm {
                sequences.push(mismatch_of(&pm));
            }
            mu.push(
                sequences
                    .iter()
                    .map(|s| config.nonspecific_affinity.predict(s))
                    .collect::<Result<Vec<f64>>>()?,
            );
            phi.push(config.probe_effect.predict(&pm)?);
            probes.push(Probe {
                index: j as u32 + 1,
                sequences,
            });
        }
        genes.push(ProbeSet { gene_id, probes });
    }

    let mut theta = Vec::with_capacity(n_genes);
    let mut concentration = Vec::with_capacity(n_genes);
    let mut present = Vec::with_capacity(n_genes);
    for g in 0..n_genes {
        let per_array: Vec<Option<f64>> = if g < n_spiked {
            let offset: f64 = config.gene_offset_sd * rng.sample::<f64, _>(StandardNormal);
            let conc: Vec<f64> = (0..n_arrays).map(|i| design.concentration(g, mixture_of(i))).collect();
            let t = conc
                .iter()
                .map(|&c| (c > 0.0).then(|| (c * config.signal_per_pm).ln() + offset))
                .collect();
            concentration.push(Some(conc));
            t
        } else {
            let is_present = rng.random::<f64>() < config.background_present_fraction;
            let level = rng.random_range(lo..=hi);
            concentration.push(None);
            vec![is_present.then_some(level); n_arrays]
        };
        present.push(per_array.iter().map(Option::is_some).collect());
        theta.push(
            per_array
                .iter()
                .flat_map(|t| (0..n_channels).map(move |h| if h == 0 { *t } else { None }))
                .collect(),
        );
    }

    let nu: Vec<f64> = arrays
        .iter()
        .map(|a| config.nu_by_condition.get(a.condition as usize).copied().unwrap_or(0.0))
        .collect();
    let params = ModelParams::new(
        vec![config.optical; n_arrays],
        mu,
        phi,
        nu,
        theta,
        config.noise,
        vec![config.probes_per_gene; n_genes],
    )?;
    let skeleton = Skeleton {
        genes,
        arrays,
        channels,
    };
    let dataset = generate_from_params(&params, &skeleton, &mut rng)?;

    let two_group = {
        let mut conds: Vec<u32> = skeleton.arrays.iter().map(|a| a.condition).collect();
        conds.sort_unstable();
        conds.dedup();
        conds == [0, 1]
    };
    let beta1 = (0..n_genes)
        .map(|g| {
            if !two_group {
                return None;
            }
            let level = |c: u32| {
                skeleton
                    .arrays
                    .iter()
                    .position(|a| a.condition == c)
                    .and_then(|i| params.theta(g, i, 0))
            };
            Some(level(1)? - level(0)?)
        })
        .collect();
    let truth = GroundTruth {
        params,
        spiked: (0..n_genes).map(|g| g < n_spiked).collect(),
        concentration,
        present,
        beta1,
    };
    Ok((dataset, truth))
}
