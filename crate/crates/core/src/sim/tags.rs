use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::generate::{correlated_normals, default_nonspecific_affinity, default_probe_effect, random_sequence};
use crate::affinity::AffinityModel;
use crate::error::{Error, Result};
use crate::model::{ArrayMeta, NoiseParams, Probe, ProbeLevelDataset, ProbeSet, GREEN, RED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    /// Untouched pool mutant, dead or alive in both channels.
    Pool,
    /// Absent from the red (experimental) sample, present in green.
    DeadAlive,
    /// Spiked at the same level in both channels.
    Same,
    /// Green representation twice the red one.
    Ratio,
}

impl TagKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TagKind::Pool => "pool",
            TagKind::DeadAlive => "dead_alive",
            TagKind::Same => "same",
            TagKind::Ratio => "ratio",
        }
    }

    pub fn parse(s: &str) -> Option<TagKind> {
        [TagKind::Pool, TagKind::DeadAlive, TagKind::Same, TagKind::Ratio]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagTruth {
    pub kind: TagKind,
    /// Spike concentration group (`high`, `medium`, `low`); empty for pool tags.
    pub group: String,
    pub alive_red: bool,
    pub alive_green: bool,
    /// `theta_G - theta_R` when alive in both channels.
    pub log_ratio: Option<f64>,
}

impl TagTruth {
    /// Same representation in both channels (dead/dead or alive/alive at equal level).
    pub fn same_representation(&self) -> bool {
        match self.kind {
            TagKind::Pool | TagKind::Same => true,
            TagKind::DeadAlive | TagKind::Ratio => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagSimConfig {
    pub pool_tags: usize,
    /// Fraction of pool mutants dead in both samples.
    pub dead_fraction: f64,
    pub alive_mean: f64,
    pub alive_sd: f64,
    /// Spike levels (log signal) of the high, medium and low groups.
    pub group_levels: [f64; 3],
    /// Tags per spike kind and group.
    pub tags_per_cell: usize,
    /// Log ratio of the `Ratio` spikes.
    pub spike_log_ratio: f64,
    /// Noise; the correlations act across the two channels of one spot.
    pub noise: NoiseParams,
    pub optical: [f64; 2],
    /// Signal normalization of the red and green channels.
    pub channel_nu: [f64; 2],
    /// Draw the specific noise from a scaled Student t with 3 degrees of freedom.
    pub heavy_tailed: bool,
    pub probe_length: usize,
    pub nonspecific_affinity: AffinityModel,
    pub probe_effect: AffinityModel,
}

impl Default for TagSimConfig {
    fn default() -> Self {
        TagSimConfig {
            pool_tags: 3000,
            dead_fraction: 0.2,
            alive_mean: 9.0,
            alive_sd: 1.2,
            group_levels: [10.0, 8.0, 6.0],
            tags_per_cell: 20,
            spike_log_ratio: std::f64::consts::LN_2,
            noise: NoiseParams {
                sigma_n: 0.4,
                rho_n: 0.7,
                sigma_s: 0.25,
                rho_s: 0.6,
            },
            optical: [30.0, 30.0],
            channel_nu: [0.0, 0.3],
            heavy_tailed: false,
            probe_length: 25,
            nonspecific_affinity: default_nonspecific_affinity(),
            probe_effect: default_probe_effect(),
        }
    }
}

const GROUPS: [&str; 3] = ["high", "medium", "low"];

/// Two-colour tag experiment: one array, channels R and G, two probes per
/// mutant. Both channels share the probe sequence and hence `mu` and `phi`.
pub fn generate_tags(config: &TagSimConfig, seed: u64) -> Result<(ProbeLevelDataset, Vec<TagTruth>)> {
    config.noise.validate()?;
    if !(0.0..=1.0).contains(&config.dead_fraction) || config.alive_sd < 0.0 {
        return Err(Error::InvalidParameter("invalid tag population settings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t3 = StudentT::new(3.0).expect("valid degrees of freedom");
    let t_scale = (1.0f64 / 3.0).sqrt();

    // (alive R, alive G, theta R, theta G)
    let mut plan: Vec<(TagTruth, Option<f64>, Option<f64>)> = Vec::new();
    for _ in 0..config.pool_tags {
        let dead = rng.random::<f64>() < config.dead_fraction;
        let theta = config.alive_mean + config.alive_sd * rng.sample::<f64, _>(StandardNormal);
        let t = (!dead).then_some(theta);
        plan.push((
            TagTruth {
                kind: TagKind::Pool,
                group: String::new(),
                alive_red: !dead,
                alive_green: !dead,
                log_ratio: t.map(|_| 0.0),
            },
            t,
            t,
        ));
    }
    let half = config.spike_log_ratio / 2.0;
    for (group, &level) in GROUPS.iter().zip(&config.group_levels) {
        for kind in [TagKind::DeadAlive, TagKind::Same, TagKind::Ratio] {
            for _ in 0..config.tags_per_cell {
                let (r, g) = match kind {
                    TagKind::DeadAlive => (None, Some(level)),
                    TagKind::Same => (Some(level), Some(level)),
                    _ => (Some(level - half), Some(level + half)),
                };
                plan.push((
                    TagTruth {
                        kind,
                        group: group.to_string(),
                        alive_red: r.is_some(),
                        alive_green: g.is_some(),
                        log_ratio: r.zip(g).map(|(r, g)| g - r),
                    },
                    r,
                    g,
                ));
            }
        }
    }

    let noise = config.noise;
    let mut genes = Vec::with_capacity(plan.len());
    let mut data = Vec::with_capacity(plan.len() * 4);
    let (mut xi, mut eps) = (Vec::new(), Vec::new());
    for (t, (_, theta_r, theta_g)) in plan.iter().enumerate() {
        let mut probes = Vec::with_capacity(2);
        for j in 0..2 {
            let seq = random_sequence(&mut rng, config.probe_length);
            let mu = config.nonspecific_affinity.predict(&seq)?;
            let phi = config.probe_effect.predict(&seq)?;
            correlated_normals(&mut rng, 2, noise.sigma_n, noise.rho_n, &mut xi);
            if config.heavy_tailed {
                let shared = t3.sample(&mut rng) * t_scale;
                let (a, b) = (noise.rho_s.sqrt(), (1.0 - noise.rho_s).sqrt());
                eps.clear();
                for _ in 0..2 {
                    let own = t3.sample(&mut rng) * t_scale;
                    eps.push(noise.sigma_s * (a * shared + b * own));
                }
            } else {
                correlated_normals(&mut rng, 2, noise.sigma_s, noise.rho_s, &mut eps);
            }
            for (h, theta) in [theta_r, theta_g].into_iter().enumerate() {
                let mut y = config.optical[h] + (mu + xi[h]).exp();
                if let Some(theta) = theta {
                    y += (config.channel_nu[h] + phi + theta + eps[h]).exp();
                }
                data.push(y);
            }
            probes.push(Probe {
                index: j + 1,
                sequences: vec![seq.clone(), seq],
            });
        }
        genes.push(ProbeSet {
            gene_id: format!("tag_{:05}", t + 1),
            probes,
        });
    }
    let dataset = ProbeLevelDataset::new(
        genes,
        vec![ArrayMeta {
            id: "pool".into(),
            condition: 0,
        }],
        vec![RED.to_string(), GREEN.to_string()],
        data,
    )?;
    Ok((dataset, plan.into_iter().map(|(t, _, _)| t).collect()))
}
