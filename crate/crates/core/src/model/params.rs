use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-scale spread and exchangeable cross-array correlation of the
/// nonspecific (`xi`) and specific (`eps`) random effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma_n: f64,
    pub rho_n: f64,
    pub sigma_s: f64,
    pub rho_s: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        for rho in [self.rho_n, self.rho_s] {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidCorrelation(rho));
            }
        }
        for sigma in [self.sigma_n, self.sigma_s] {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "log-scale standard deviation {sigma} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    pub fn var_n(&self) -> f64 {
        self.sigma_n * self.sigma_n
    }

    pub fn var_s(&self) -> f64 {
        self.sigma_s * self.sigma_s
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            sigma_n: 0.6,
            rho_n: 0.7,
            sigma_s: 0.25,
            rho_s: 0.6,
        }
    }
}

/// Every parameter of the additive optical + lognormal binding model.
///
/// Probe-level maps use the flat probe numbering of the dataset layout
/// (gene-major), channel maps use the dataset channel order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Optical floor per array.
    pub optical: Vec<f64>,
    /// Nonspecific log mean, `[probe][channel]`.
    pub mu: Vec<Vec<f64>>,
    /// Probe effect, shared by arrays and channels, `[probe]`.
    pub phi: Vec<f64>,
    /// Normalization constant per array (shared by channels).
    pub nu: Vec<f64>,
    /// Log specific signal `[gene][array * channels + channel]`; `None`
    /// means the target is absent and the specific term is zero.
    pub theta: Vec<Vec<Option<f64>>>,
    pub noise: NoiseParams,
    probes_per_gene: Vec<usize>,
}

impl ModelParams {
    pub fn new(
        optical: Vec<f64>,
        mu: Vec<Vec<f64>>,
        phi: Vec<f64>,
        nu: Vec<f64>,
        theta: Vec<Vec<Option<f64>>>,
        noise: NoiseParams,
        probes_per_gene: Vec<usize>,
    ) -> Result<Self> {
        noise.validate()?;
        let n_arrays = optical.len();
        let n_probes: usize = probes_per_gene.iter().sum();
        let n_channels = mu.first().map_or(0, Vec::len);
        if n_arrays == 0 || n_channels == 0 {
            return Err(Error::InvalidParameter("model needs arrays and channels".into()));
        }
        if nu.len() != n_arrays
            || mu.len() != n_probes
            || phi.len() != n_probes
            || theta.len() != probes_per_gene.len()
            || mu.iter().any(|m| m.len() != n_channels)
            || theta.iter().any(|t| t.len() != n_arrays * n_channels)
        {
            return Err(Error::DimensionMismatch(
                "model parameter maps disagree on genes, probes, arrays or channels".into(),
            ));
        }
        Ok(ModelParams {
            optical,
            mu,
            phi,
            nu,
            theta,
            noise,
            probes_per_gene,
        })
    }

    /// Two-condition parametrization `theta_gi = beta0 + beta1 * x_i` on the
    /// channels flagged in `signal_channels`; other channels carry no signal.
    /// Genes with `beta0 = None` are absent everywhere.
    #[allow(clippy::too_many_arguments)]
    pub fn two_group(
        optical: Vec<f64>,
        mu: Vec<Vec<f64>>,
        phi: Vec<f64>,
        nu: Vec<f64>,
        betas: &[(Option<f64>, f64)],
        conditions: &[u32],
        signal_channels: &[bool],
        noise: NoiseParams,
        probes_per_gene: Vec<usize>,
    ) -> Result<Self> {
        let theta = betas
            .iter()
            .map(|&(b0, b1)| {
                conditions
                    .iter()
                    .flat_map(|&x| {
                        signal_channels
                            .iter()
                            .map(move |&s| b0.filter(|_| s).map(|b0| b0 + b1 * x as f64))
                    })
                    .collect()
            })
            .collect();
        Self::new(optical, mu, phi, nu, theta, noise, probes_per_gene)
    }

    pub fn n_arrays(&self) -> usize {
        self.optical.len()
    }

    pub fn n_channels(&self) -> usize {
        self.mu[0].len()
    }

    pub fn n_genes(&self) -> usize {
        self.probes_per_gene.len()
    }

    pub fn probes_per_gene(&self) -> &[usize] {
        &self.probes_per_gene
    }

    pub fn flat_probe(&self, g: usize, j: usize) -> usize {
        self.probes_per_gene[..g].iter().sum::<usize>() + j
    }

    pub fn theta(&self, g: usize, i: usize, h: usize) -> Option<f64> {
        self.theta[g][i * self.n_channels() + h]
    }

    /// `E[N] = exp(mu + sigma_N^2 / 2)` for flat probe `p`.
    pub fn gamma1(&self, p: usize, h: usize) -> f64 {
        (self.mu[p][h] + 0.5 * self.noise.var_n()).exp()
    }

    /// `E[S]`, zero when the target is absent.
    pub fn gamma2(&self, g: usize, p: usize, i: usize, h: usize) -> f64 {
        match self.theta(g, i, h) {
            Some(t) => (self.nu[i] + self.phi[p] + t + 0.5 * self.noise.var_s()).exp(),
            None => 0.0,
        }
    }
}
