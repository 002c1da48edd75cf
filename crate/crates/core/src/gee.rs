//! Per-gene estimating equations for a two-condition log fold change.
//!
//! For gene `g` the specific log signal on array `i` is `beta0 + beta1 x_i`
//! with `x_i` in {0, 1}. With `y = PM - O`, the expected value is
//! `E = gamma1 + gamma2` where `gamma1 = exp(mu + sigma_N^2 / 2)` and
//! `gamma2 = exp(nu + phi + theta + sigma_S^2 / 2)`. The estimate solves
//!
//! `U(beta) = (1/J) sum_j sum_i gamma2 (1, x_i)' (y_ji - E_ji) / V_ji = 0`
//!
//! with the diagonal working variance `V` of the model. Its covariance is
//! the sandwich `D^-1 Omega D^-1 / J`, where `Omega` uses the full
//! cross-array covariance of the model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundFit;
use crate::detect::{model_detect, ModelDetectInput};
use crate::error::{Error, Result};
use crate::model::{cross_array_covariance, NoiseParams, ProbeLevelDataset, PM};
use crate::numeric::{normal_quantile, normal_sf};

pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeeOptions {
    pub max_iter: usize,
    /// Convergence threshold on the norm of the undamped step.
    pub tol: f64,
    pub max_halvings: usize,
    /// A condition is judged absent when its expected specific signal falls
    /// below this multiple of its expected background ...
    pub absent_ratio: f64,
    /// ... for this many consecutive iterations.
    pub absent_patience: usize,
    /// Two-sided test level.
    pub level: f64,
    pub floor: f64,
}

impl Default for GeeOptions {
    fn default() -> Self {
        GeeOptions {
            max_iter: 100,
            tol: 1e-8,
            max_halvings: 20,
            absent_ratio: 1e-6,
            absent_patience: 5,
            level: 0.01,
            floor: 0.5,
        }
    }
}

impl GeeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("test level {} not in (0, 1)", self.level)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.floor > 0.0) {
            return Err(Error::Config("max_iter, tol and floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    AbsentFallback,
    Failed,
}

impl FitStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::AbsentFallback => "absent_fallback",
            FitStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<FitStatus> {
        match s {
            "converged" => Some(FitStatus::Converged),
            "absent_fallback" => Some(FitStatus::AbsentFallback),
            "failed" => Some(FitStatus::Failed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneFitResult {
    pub gene_id: String,
    /// Natural-log scale.
    pub beta0: f64,
    pub beta1: f64,
    /// Sandwich covariance of `(beta0, beta1)`; NaN unless converged.
    pub covariance: Mat2,
    pub se_beta1: f64,
    /// Two-sided test of `beta1 = 0` when converged, the presence test over
    /// all arrays for the absent fallback, and 1 for failed fits.
    pub p_value: f64,
    pub status: FitStatus,
    pub iterations: usize,
}

/// Data of one gene: PM intensities `[probe][array]` and the design `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneData {
    pub gene_id: String,
    pub y: Vec<Vec<f64>>,
    pub x: Vec<f64>,
}

/// Plug-in values seen by one gene.
#[derive(Debug, Clone, PartialEq)]
pub struct GenePlugins {
    pub optical: Vec<f64>,
    /// `[probe][array]`
    pub mu: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub nu: Vec<f64>,
    pub noise: NoiseParams,
}

impl GenePlugins {
    fn check(&self, data: &GeneData) -> Result<()> {
        let (j, i) = (data.y.len(), data.x.len());
        if j < 3 {
            return Err(Error::InsufficientProbes { needed: 3, got: j });
        }
        if i < 2 || !data.x.contains(&0.0) || !data.x.contains(&1.0) {
            return Err(Error::InvalidParameter(
                "two-condition fit needs arrays labelled 0 and 1".into(),
            ));
        }
        if data.x.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidParameter("condition labels must be 0 or 1".into()));
        }
        if self.optical.len() != i
            || self.nu.len() != i
            || self.mu.len() != j
            || self.phi.len() != j
            || data.y.iter().chain(&self.mu).any(|r| r.len() != i)
        {
            return Err(Error::DimensionMismatch("gene data and plug-ins disagree".into()));
        }
        Ok(())
    }
}

/// Collects gene `g` from `dataset` with the plug-ins of `fit`, labelling
/// arrays by their condition.
pub fn gene_problem(dataset: &ProbeLevelDataset, fit: &BackgroundFit, g: usize) -> Result<(GeneData, GenePlugins)> {
    let pm = dataset.require_channel(PM)?;
    let signal = fit.signal()?;
    let probes: Vec<usize> = dataset.probe_range(g).collect();
    let arrays = 0..dataset.n_arrays();
    let data = GeneData {
        gene_id: dataset.genes()[g].gene_id.clone(),
        y: probes
            .iter()
            .map(|&p| arrays.clone().map(|i| dataset.value(p, i, pm)).collect())
            .collect(),
        x: dataset.arrays().iter().map(|a| a.condition as f64).collect(),
    };
    let plugins = GenePlugins {
        optical: fit.optical.clone(),
        mu: probes
            .iter()
            .map(|&p| arrays.clone().map(|i| fit.mu(p, i)).collect())
            .collect(),
        phi: probes.iter().map(|&p| signal.phi[p]).collect(),
        nu: fit.nu.clone(),
        noise: fit.noise()?,
    };
    Ok((data, plugins))
}

/// Relative floor on the working variance, which keeps the equation
/// defined when both noise terms vanish.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Moment terms of one (probe, array) cell at the current `beta`.
#[derive(Debug, Clone, Copy)]
struct Cell {
    gamma1: f64,
    gamma2: f64,
    v: f64,
    y: f64,
    x: f64,
}

struct Evaluator<'a> {
    data: &'a GeneData,
    plug: &'a GenePlugins,
    with_background: bool,
    c_n: f64,
    c_s: f64,
}

impl<'a> Evaluator<'a> {
    fn new(data: &'a GeneData, plug: &'a GenePlugins, with_background: bool) -> Self {
        Evaluator {
            data,
            plug,
            with_background,
            c_n: plug.noise.var_n().exp_m1(),
            c_s: plug.noise.var_s().exp_m1(),
        }
    }

    fn cell(&self, beta: [f64; 2], j: usize, i: usize) -> Cell {
        let nz = &self.plug.noise;
        let x = self.data.x[i];
        let gamma1 = if self.with_background {
            (self.plug.mu[j][i] + 0.5 * nz.var_n()).exp()
        } else {
            0.0
        };
        let gamma2 = (self.plug.nu[i] + self.plug.phi[j] + beta[0] + beta[1] * x + 0.5 * nz.var_s()).exp();
        let e = gamma1 + gamma2;
        Cell {
            gamma1,
            gamma2,
            v: (gamma1 * gamma1 * self.c_n + gamma2 * gamma2 * self.c_s).max(VARIANCE_FLOOR * e * e),
            y: self.data.y[j][i] - self.plug.optical[i],
            x,
        }
    }

    fn cells(&self, beta: [f64; 2]) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        let n_i = self.data.x.len();
        (0..self.data.y.len()).flat_map(move |j| (0..n_i).map(move |i| (j, i, self.cell(beta, j, i))))
    }

    fn n_probes(&self) -> f64 {
        self.data.y.len() as f64
    }

    fn equation(&self, beta: [f64; 2]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for (_, _, c) in self.cells(beta) {
            let w = c.gamma2 * (c.y - c.gamma1 - c.gamma2) / c.v;
            u[0] += w;
            u[1] += w * c.x;
        }
        let jn = self.n_probes();
        [u[0] / jn, u[1] / jn]
    }

    /// Estimating equation, its Jacobian, and the expected information.
    fn linearize(&self, beta: [f64; 2]) -> ([f64; 2], Mat2, Mat2) {
        let (mut u, mut jac, mut info) = ([0.0; 2], [[0.0; 2]; 2], [[0.0; 2]; 2]);
        for (_, _, c) in self.cells(beta) {
            let r = c.y - c.gamma1 - c.gamma2;
            let g2 = c.gamma2;
            let w = g2 * r / c.v;
            let fisher = g2 * g2 / c.v;
            let curvature = r * (g2 / c.v - 2.0 * g2 * g2 * g2 * self.c_s / (c.v * c.v)) - fisher;
            let xt = [1.0, c.x];
            for a in 0..2 {
                u[a] += w * xt[a];
                for b in 0..2 {
                    jac[a][b] += curvature * xt[a] * xt[b];
                    info[a][b] += fisher * xt[a] * xt[b];
                }
            }
        }
        let jn = self.n_probes();
        let scale = |m: Mat2| m.map(|r| r.map(|v| v / jn));
        ([u[0] / jn, u[1] / jn], scale(jac), scale(info))
    }

    /// Ratio of expected specific to expected background signal in each condition.
    fn signal_ratio(&self, beta: [f64; 2]) -> [f64; 2] {
        let (mut s, mut n) = ([0.0; 2], [0.0; 2]);
        for (_, _, c) in self.cells(beta) {
            let k = c.x as usize;
            s[k] += c.gamma2;
            n[k] += c.gamma1;
        }
        [s[0] / n[0], s[1] / n[1]]
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inv2(m: &Mat2) -> Option<Mat2> {
    let d = det2(m);
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(d.abs() > 1e-14 * scale * scale) || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            c[r][k] = a[r][0] * b[0][k] + a[r][1] * b[1][k];
        }
    }
    c
}

fn solve2(m: &Mat2, v: [f64; 2]) -> Option<[f64; 2]> {
    let inv = inv2(m)?;
    let s = [inv[0][0] * v[0] + inv[0][1] * v[1], inv[1][0] * v[0] + inv[1][1] * v[1]];
    (s[0].is_finite() && s[1].is_finite()).then_some(s)
}

/// Quantities entering the sandwich at a given `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeeInternals {
    /// `E[Y - O]` per `[probe][array]`.
    pub expected: Vec<Vec<f64>>,
    /// Columns of `A_j = (dE/dbeta)' V0^-1`, per `[probe][array]`.
    pub a: Vec<Vec<[f64; 2]>>,
    /// Diagonal working covariance per `[probe][array]`.
    pub v0: Vec<Vec<f64>>,
    pub d: Mat2,
    pub omega: Mat2,
    pub n_probes: usize,
}

/// Builds `D = (1/J) sum A dE/dbeta` and `Omega = (1/J) sum A Sigma A'`,
/// where `Sigma` has `V` on the diagonal and the cross-array covariance `W`
/// (with per-array `gamma`s) elsewhere.
pub fn gee_internals(
    data: &GeneData,
    plug: &GenePlugins,
    beta: [f64; 2],
    with_background: bool,
) -> Result<GeeInternals> {
    plug.check(data)?;
    let ev = Evaluator::new(data, plug, with_background);
    let n_j = data.y.len();
    let n_i = data.x.len();
    let mut expected = vec![vec![0.0; n_i]; n_j];
    let mut a = vec![vec![[0.0; 2]; n_i]; n_j];
    let mut v0 = vec![vec![0.0; n_i]; n_j];
    let mut d = [[0.0; 2]; 2];
    let mut omega = [[0.0; 2]; 2];
    for j in 0..n_j {
        let cells: Vec<Cell> = (0..n_i).map(|i| ev.cell(beta, j, i)).collect();
        for (i, c) in cells.iter().enumerate() {
            expected[j][i] = c.gamma1 + c.gamma2;
            v0[j][i] = c.v;
            a[j][i] = [c.gamma2 / c.v, c.gamma2 * c.x / c.v];
            let grad = [c.gamma2, c.gamma2 * c.x];
            for r in 0..2 {
                for k in 0..2 {
                    d[r][k] += a[j][i][r] * grad[k];
                }
            }
        }
        for (i, ci) in cells.iter().enumerate() {
            for (k, ck) in cells.iter().enumerate() {
                let cov = if i == k {
                    ci.v
                } else {
                    cross_array_covariance(&plug.noise, ci.gamma1, ck.gamma1, ci.gamma2, ck.gamma2)
                };
                for r in 0..2 {
                    for s in 0..2 {
                        omega[r][s] += a[j][i][r] * cov * a[j][k][s];
                    }
                }
            }
        }
    }
    let jn = n_j as f64;
    Ok(GeeInternals {
        expected,
        a,
        v0,
        d: d.map(|r| r.map(|v| v / jn)),
        omega: omega.map(|r| r.map(|v| v / jn)),
        n_probes: n_j,
    })
}

/// `D^-1 Omega D^-1' / J`.
pub fn sandwich_covariance(internals: &GeeInternals) -> Result<Mat2> {
    let d_inv = inv2(&internals.d).ok_or(Error::SingularBread)?;
    let d_inv_t = [[d_inv[0][0], d_inv[1][0]], [d_inv[0][1], d_inv[1][1]]];
    let m = mul2(&mul2(&d_inv, &internals.omega), &d_inv_t);
    let jn = internals.n_probes as f64;
    Ok(m.map(|r| r.map(|v| v / jn)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeTest {
    pub reject: bool,
    pub p_value: f64,
    /// `-/+ z_{1 - level/2} SE(beta1)`.
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided Wald test of `beta1 = 0`.
pub fn de_test(beta1: f64, se: f64, level: f64) -> DeTest {
    let p_value = if se > 0.0 && se.is_finite() {
        2.0 * normal_sf((beta1 / se).abs())
    } else if beta1 != 0.0 {
        0.0
    } else {
        1.0
    };
    let half = normal_quantile(1.0 - level / 2.0) * se;
    DeTest {
        reject: p_value < level,
        p_value,
        lower: -half,
        upper: half,
    }
}

fn initial_beta(ev: &Evaluator) -> [f64; 2] {
    let mut excess: Vec<f64> = ev.cells([0.0, 0.0]).map(|(_, _, c)| c.y - c.gamma1).collect();
    excess.sort_by(f64::total_cmp);
    let q75 = crate::numeric::quantile_sorted(&excess, 0.75).max(0.5);
    let mean_phi = ev.plug.phi.iter().sum::<f64>() / ev.plug.phi.len() as f64;
    [q75.ln() - mean_phi, 0.0]
}

fn solve(data: &GeneData, plug: &GenePlugins, opts: &GeeOptions, with_background: bool) -> Result<GeneFitResult> {
    opts.validate()?;
    plug.check(data)?;
    let ev = Evaluator::new(data, plug, with_background);
    let mut beta = initial_beta(&ev);
    let mut absent_run = 0;
    let mut status = FitStatus::Failed;
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let (u, jac, info) = ev.linearize(beta);
        let u_norm = norm(u);
        if !u_norm.is_finite() {
            break;
        }
        let newton = solve2(&jac, u).map(|s| [-s[0], -s[1]]);
        let fisher = solve2(&info, u);
        let Some(full) = newton.or(fisher) else { break };
        if norm(full) < opts.tol {
            beta = [beta[0] + full[0], beta[1] + full[1]];
            status = FitStatus::Converged;
            break;
        }
        let mut accepted = None;
        'dirs: for dir in [newton, fisher].into_iter().flatten() {
            let mut t = 1.0;
            for _ in 0..=opts.max_halvings {
                let cand = [beta[0] + t * dir[0], beta[1] + t * dir[1]];
                let n = norm(ev.equation(cand));
                if n.is_finite() && n < u_norm {
                    accepted = Some(cand);
                    break 'dirs;
                }
                t *= 0.5;
            }
        }
        beta = match accepted {
            Some(b) => b,
            // no decrease along either direction: the iterate sits at the
            // rounding floor of the equation
            None if norm(full) < 1e3 * opts.tol => {
                status = FitStatus::Converged;
                break;
            }
            None => break,
        };
        if with_background {
            let ratio = ev.signal_ratio(beta);
            if ratio.iter().any(|r| *r < opts.absent_ratio) {
                absent_run += 1;
                if absent_run >= opts.absent_patience {
                    status = FitStatus::AbsentFallback;
                    break;
                }
            } else {
                absent_run = 0;
            }
        }
    }

    let nan2 = [[f64::NAN; 2]; 2];
    match status {
        FitStatus::Converged => {
            let internals = gee_internals(data, plug, beta, with_background)?;
            let covariance = sandwich_covariance(&internals)?;
            let se = covariance[1][1].max(0.0).sqrt();
            Ok(GeneFitResult {
                gene_id: data.gene_id.clone(),
                beta0: beta[0],
                beta1: beta[1],
                covariance,
                se_beta1: se,
                p_value: de_test(beta[1], se, opts.level).p_value,
                status,
                iterations,
            })
        }
        FitStatus::AbsentFallback => {
            let (_, p) = model_detect(&ModelDetectInput {
                pm: &data.y,
                mu: &plug.mu,
                optical: &plug.optical,
                sigma_n: plug.noise.sigma_n,
                rho_n: plug.noise.rho_n,
                floor: opts.floor,
            })?;
            Ok(GeneFitResult {
                gene_id: data.gene_id.clone(),
                beta0: beta[0],
                beta1: beta[1],
                covariance: nan2,
                se_beta1: f64::NAN,
                p_value: p,
                status,
                iterations,
            })
        }
        FitStatus::Failed => Ok(GeneFitResult {
            gene_id: data.gene_id.clone(),
            beta0: beta[0],
            beta1: beta[1],
            covariance: nan2,
            se_beta1: f64::NAN,
            p_value: 1.0,
            status,
            iterations,
        }),
    }
}

/// Damped Newton solve of the estimating equation.
///
/// Each step uses the exact Jacobian (falling back to the expected
/// information when it is singular) and is halved up to `max_halvings`
/// times until the equation norm decreases. Convergence is declared when
/// the undamped step is shorter than `tol`.
pub fn solve_gee(data: &GeneData, plug: &GenePlugins, opts: &GeeOptions) -> Result<GeneFitResult> {
    solve(data, plug, opts, true)
}

/// The same solve with the background term removed from the mean and
/// variance, as if `PM - O` were pure specific signal.
pub fn no_background_baseline(data: &GeneData, plug: &GenePlugins, opts: &GeeOptions) -> Result<GeneFitResult> {
    solve(data, plug, opts, false)
}

/// Norm of the estimating equation at `beta`.
pub fn equation_norm(data: &GeneData, plug: &GenePlugins, beta: [f64; 2], with_background: bool) -> Result<f64> {
    plug.check(data)?;
    Ok(norm(Evaluator::new(data, plug, with_background).equation(beta)))
}

/// Fits every gene of a two-condition dataset in parallel.
pub fn fit_genes(
    dataset: &ProbeLevelDataset,
    fit: &BackgroundFit,
    opts: &GeeOptions,
    with_background: bool,
) -> Result<Vec<GeneFitResult>> {
    fit.check_dataset(dataset)?;
    (0..dataset.n_genes())
        .into_par_iter()
        .map(|g| {
            let (data, plug) = gene_problem(dataset, fit, g)?;
            solve(&data, &plug, opts, with_background)
        })
        .collect()
}
