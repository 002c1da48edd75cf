//! Sequence affinity model.
//!
//! The log-scale affinity of a probe is an intercept plus, for each of the
//! bases A, C and G, a smooth function of position (T is the reference
//! base). Each position curve is a combination of the cubic B-spline basis
//! from [`crate::numeric::spline`], so a 25-mer model with `df = 5` has
//! `1 + 3 * 5 = 16` coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::spline::SplineBasis;
use crate::numeric::{weighted_least_squares, Matrix};

pub const DEFAULT_DF: usize = 5;
pub const MIN_TRAINING_PROBES: usize = 100;
const BASES: [char; 3] = ['A', 'C', 'G'];

/// Index of the base among the coded bases, `None` for the reference T.
fn base_code(b: u8, position: usize) -> Result<Option<usize>> {
    match b {
        b'A' => Ok(Some(0)),
        b'C' => Ok(Some(1)),
        b'G' => Ok(Some(2)),
        b'T' => Ok(None),
        other => Err(Error::MalformedSequence {
            position,
            reason: format!("unexpected symbol {:?}", other as char),
        }),
    }
}

/// Builds design rows `[1, A_1..A_df, C_1..C_df, G_1..G_df]` where each base
/// column is the spline basis summed over the positions holding that base.
#[derive(Debug, Clone)]
pub struct AffinityDesign {
    df: usize,
    length: usize,
    /// `basis[pos]` = the df retained basis values at position `pos + 1`
    basis: Vec<Vec<f64>>,
}

impl AffinityDesign {
    pub fn new(df: usize, length: usize) -> Result<Self> {
        let spline = SplineBasis::new(df, length)?;
        let basis = (1..=length).map(|pos| spline.eval(pos)).collect::<Result<Vec<_>>>()?;
        Ok(AffinityDesign { df, length, basis })
    }

    pub fn n_params(&self) -> usize {
        1 + BASES.len() * self.df
    }

    pub fn row(&self, sequence: &str) -> Result<Vec<f64>> {
        let bytes = sequence.as_bytes();
        if bytes.len() != self.length {
            return Err(Error::MalformedSequence {
                position: bytes.len().min(self.length) + 1,
                reason: format!("length {} differs from {}", bytes.len(), self.length),
            });
        }
        let mut row = vec![0.0; self.n_params()];
        row[0] = 1.0;
        for (pos, &b) in bytes.iter().enumerate() {
            if let Some(code) = base_code(b, pos + 1)? {
                let start = 1 + code * self.df;
                for (k, v) in self.basis[pos].iter().enumerate() {
                    row[start + k] += v;
                }
            }
        }
        Ok(row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "AffinityDocument", try_from = "AffinityDocument")]
pub struct AffinityModel {
    intercept: f64,
    /// `[base][spline index]` for A, C, G
    coefficients: Vec<Vec<f64>>,
    df: usize,
    probe_length: usize,
    residual_sd: f64,
    intercept_only: bool,
    /// `[base][position]` effect curves, cached from the coefficients
    position_effects: Vec<Vec<f64>>,
}

/// JSON form, coefficients keyed by base letter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinityDocument {
    pub intercept: f64,
    pub df: usize,
    pub probe_length: usize,
    pub coefficients: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub residual_sd: f64,
    #[serde(default)]
    pub intercept_only: bool,
}

impl From<AffinityModel> for AffinityDocument {
    fn from(m: AffinityModel) -> Self {
        AffinityDocument {
            intercept: m.intercept,
            df: m.df,
            probe_length: m.probe_length,
            coefficients: BASES
                .iter()
                .zip(m.coefficients)
                .map(|(b, c)| (b.to_string(), c))
                .collect(),
            residual_sd: m.residual_sd,
            intercept_only: m.intercept_only,
        }
    }
}

impl TryFrom<AffinityDocument> for AffinityModel {
    type Error = Error;
    fn try_from(doc: AffinityDocument) -> Result<Self> {
        let mut coefficients = Vec::with_capacity(3);
        for b in BASES {
            let c = doc
                .coefficients
                .get(&b.to_string())
                .ok_or_else(|| Error::Config(format!("affinity model lacks base {b}")))?;
            if c.len() != doc.df {
                return Err(Error::Config(format!(
                    "affinity base {b}: {} coefficients for df {}",
                    c.len(),
                    doc.df
                )));
            }
            coefficients.push(c.clone());
        }
        if doc.coefficients.len() != 3 {
            return Err(Error::Config("affinity coefficients must be keyed A, C, G".into()));
        }
        let mut m = AffinityModel::from_coefficients(doc.intercept, coefficients, doc.probe_length)?;
        m.residual_sd = doc.residual_sd;
        m.intercept_only = doc.intercept_only;
        Ok(m)
    }
}

impl AffinityModel {
    /// Model from explicit coefficients (`[A, C, G][spline index]`).
    pub fn from_coefficients(intercept: f64, coefficients: Vec<Vec<f64>>, probe_length: usize) -> Result<Self> {
        let df = coefficients.first().map_or(0, Vec::len);
        if coefficients.len() != 3 || coefficients.iter().any(|c| c.len() != df) {
            return Err(Error::InvalidParameter(
                "affinity coefficients must be three equal-length rows".into(),
            ));
        }
        let design = AffinityDesign::new(df, probe_length)?;
        let position_effects = coefficients
            .iter()
            .map(|c| {
                design
                    .basis
                    .iter()
                    .map(|b| b.iter().zip(c).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        Ok(AffinityModel {
            intercept,
            coefficients,
            df,
            probe_length,
            residual_sd: 0.0,
            intercept_only: false,
            position_effects,
        })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn probe_length(&self) -> usize {
        self.probe_length
    }

    pub fn residual_sd(&self) -> f64 {
        self.residual_sd
    }

    /// Set when the training design was rank deficient and the model fell
    /// back to an intercept.
    pub fn is_intercept_only(&self) -> bool {
        self.intercept_only
    }

    pub fn n_params(&self) -> usize {
        1 + 3 * self.df
    }

    /// Coefficients in design-column order.
    pub fn coefficient_vector(&self) -> Vec<f64> {
        std::iter::once(self.intercept)
            .chain(self.coefficients.iter().flatten().copied())
            .collect()
    }

    pub fn design(&self) -> Result<AffinityDesign> {
        AffinityDesign::new(self.df, self.probe_length)
    }

    /// Effect of `base` at 1-based `position` relative to T.
    pub fn base_effect(&self, base: char, position: usize) -> f64 {
        match BASES.iter().position(|b| *b == base) {
            Some(code) => self.position_effects[code][position - 1],
            None => 0.0,
        }
    }

    pub fn predict(&self, sequence: &str) -> Result<f64> {
        let bytes = sequence.as_bytes();
        if bytes.len() != self.probe_length {
            return Err(Error::MalformedSequence {
                position: bytes.len().min(self.probe_length) + 1,
                reason: format!("length {} differs from {}", bytes.len(), self.probe_length),
            });
        }
        let mut a = self.intercept;
        for (pos, &b) in bytes.iter().enumerate() {
            if let Some(code) = base_code(b, pos + 1)? {
                a += self.position_effects[code][pos];
            }
        }
        Ok(a)
    }
}

/// Least-squares fit of `responses` on the affinity design of `sequences`.
///
/// A rank-deficient design (for example identical sequences) yields an
/// intercept-only model with [`AffinityModel::is_intercept_only`] set.
pub fn fit_affinity<S: AsRef<str>>(sequences: &[S], responses: &[f64], df: usize) -> Result<AffinityModel> {
    if sequences.len() != responses.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sequences but {} responses",
            sequences.len(),
            responses.len()
        )));
    }
    if sequences.len() < MIN_TRAINING_PROBES {
        return Err(Error::InsufficientProbes {
            needed: MIN_TRAINING_PROBES,
            got: sequences.len(),
        });
    }
    if responses.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("affinity responses must be finite".into()));
    }
    let length = sequences[0].as_ref().len();
    let design = AffinityDesign::new(df, length)?;
    let mut x = Matrix::zeros(0, design.n_params());
    for s in sequences {
        x.push_row(&design.row(s.as_ref())?)?;
    }
    let n = responses.len() as f64;
    match weighted_least_squares(&x, responses, &vec![1.0; responses.len()]) {
        Ok(coef) => {
            let coefficients = coef[1..].chunks(df).map(<[f64]>::to_vec).collect();
            let mut model = AffinityModel::from_coefficients(coef[0], coefficients, length)?;
            let fitted = x.mul_vec(&coef);
            let rss: f64 = fitted.iter().zip(responses).map(|(f, y)| (y - f).powi(2)).sum();
            model.residual_sd = (rss / (n - design.n_params() as f64).max(1.0)).sqrt();
            Ok(model)
        }
        Err(Error::SingularDesign { rank, columns }) => {
            log::warn!("affinity design has rank {rank} of {columns}; using an intercept-only model");
            let mean = responses.iter().sum::<f64>() / n;
            let mut model = AffinityModel::from_coefficients(mean, vec![vec![0.0; df]; 3], length)?;
            let ss: f64 = responses.iter().map(|y| (y - mean).powi(2)).sum();
            model.residual_sd = (ss / (n - 1.0)).sqrt();
            model.intercept_only = true;
            Ok(model)
        }
        Err(e) => Err(e),
    }
}
