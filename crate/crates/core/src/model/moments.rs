//! Moments of the sum of an optical constant and two lognormal terms.

use serde::{Deserialize, Serialize};

use super::params::{ModelParams, NoiseParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    /// `E[N]`
    pub gamma1: f64,
    /// `E[S]`
    pub gamma2: f64,
    /// `var(Y)` on one array
    pub v: f64,
    /// `cov(Y_i, Y_k)` for two distinct arrays with the same `gamma`s
    pub w: f64,
}

impl MomentPair {
    pub fn new(noise: &NoiseParams, gamma1: f64, gamma2: f64) -> Self {
        MomentPair {
            gamma1,
            gamma2,
            v: same_array_variance(noise, gamma1, gamma2),
            w: cross_array_covariance(noise, gamma1, gamma1, gamma2, gamma2),
        }
    }
}

/// `V = g1^2 (e^{s_N^2} - 1) + g2^2 (e^{s_S^2} - 1)`
pub fn same_array_variance(noise: &NoiseParams, gamma1: f64, gamma2: f64) -> f64 {
    gamma1 * gamma1 * noise.var_n().exp_m1() + gamma2 * gamma2 * noise.var_s().exp_m1()
}

/// Covariance of `Y` on two distinct arrays with their own `gamma`s:
/// `g1 g1' (e^{rho_N s_N^2} - 1) + g2 g2' (e^{rho_S s_S^2} - 1)`.
pub fn cross_array_covariance(noise: &NoiseParams, g1_a: f64, g1_b: f64, g2_a: f64, g2_b: f64) -> f64 {
    g1_a * g1_b * (noise.rho_n * noise.var_n()).exp_m1() + g2_a * g2_b * (noise.rho_s * noise.var_s()).exp_m1()
}

/// `E[Y]` for gene `g`, array `i`, probe `j`, channel `h`.
pub fn expected_intensity(params: &ModelParams, g: usize, i: usize, j: usize, h: usize) -> f64 {
    let p = params.flat_probe(g, j);
    params.optical[i] + params.gamma1(p, h) + params.gamma2(g, p, i, h)
}

/// `cov(Y_gij, Y_gkj)` on channel `h`; `V` when `i == k`, `W` otherwise.
pub fn intensity_covariance(params: &ModelParams, g: usize, j: usize, h: usize, arrays: (usize, usize)) -> f64 {
    let p = params.flat_probe(g, j);
    let (i, k) = arrays;
    let g1 = params.gamma1(p, h);
    let noise = &params.noise;
    if i == k {
        same_array_variance(noise, g1, params.gamma2(g, p, i, h))
    } else {
        cross_array_covariance(noise, g1, g1, params.gamma2(g, p, i, h), params.gamma2(g, p, k, h))
    }
}

/// The curve `(V - W) / gamma2^2` as a function of `gamma2` at fixed
/// `gamma1`, which tends to `e^{s_S^2} - e^{rho_S s_S^2}` for large
/// `gamma2` and grows like `gamma2^-2` when the signal is small.
pub fn variance_profile(noise: &NoiseParams, gamma1: f64, gamma2_grid: &[f64]) -> Vec<f64> {
    let a = noise.var_n().exp() - (noise.rho_n * noise.var_n()).exp();
    let b = noise.var_s().exp() - (noise.rho_s * noise.var_s()).exp();
    gamma2_grid
        .iter()
        .map(|g2| gamma1 * gamma1 * a / (g2 * g2) + b)
        .collect()
}

/// Asymptotic `var(theta1_hat - theta2_hat)` for a k-vs-k comparison of a
/// probeset with `n_probes` identical probes: `2 (V - W) / (J k gamma2^2)`.
pub fn contrast_variance(noise: &NoiseParams, gamma1: f64, gamma2: f64, k: usize, n_probes: usize) -> f64 {
    let m = MomentPair::new(noise, gamma1, gamma2);
    2.0 * (m.v - m.w) / (n_probes as f64 * k as f64 * gamma2 * gamma2)
}
