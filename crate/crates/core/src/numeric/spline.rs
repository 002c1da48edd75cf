//! Cubic B-spline basis over probe positions `1..=L`.
//!
//! The full basis on equally spaced interior knots has `df + 1` functions
//! and sums to one everywhere. The first function is dropped so that the
//! basis can sit next to an intercept column without collinearity, which
//! leaves `df` columns per base.

use crate::error::{Error, Result};

pub const DEGREE: usize = 3;
pub const DEFAULT_PROBE_LENGTH: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    df: usize,
    length: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(df: usize, length: usize) -> Result<Self> {
        if df < DEGREE {
            return Err(Error::InvalidParameter(format!(
                "spline df must be at least {DEGREE}, got {df}"
            )));
        }
        if length < 2 {
            return Err(Error::InvalidParameter(format!(
                "probe length must be at least 2, got {length}"
            )));
        }
        let interior = df - DEGREE;
        let (lo, hi) = (1.0, length as f64);
        let mut knots = vec![lo; DEGREE + 1];
        for k in 1..=interior {
            knots.push(lo + (hi - lo) * k as f64 / (interior + 1) as f64);
        }
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Ok(SplineBasis { df, length, knots })
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// All `df + 1` basis functions at `x` (clamped to the boundary knots).
    pub fn eval_full(&self, x: f64) -> Vec<f64> {
        let t = &self.knots;
        let n_basis = self.df + 1;
        let x = x.clamp(t[0], t[t.len() - 1]);
        // span index s with t[s] <= x < t[s+1]; the right end uses the last span
        let span = if x >= t[n_basis] {
            n_basis - 1
        } else {
            t.partition_point(|&k| k <= x) - 1
        };

        let mut n = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut out = vec![0.0; n_basis];
        for (r, v) in n.iter().enumerate() {
            out[span - DEGREE + r] = *v;
        }
        out
    }

    /// The `df` retained basis values at integer `position`.
    pub fn eval(&self, position: usize) -> Result<Vec<f64>> {
        if position < 1 || position > self.length {
            return Err(Error::PositionOutOfBounds {
                position,
                length: self.length,
            });
        }
        let mut full = self.eval_full(position as f64);
        full.remove(0);
        Ok(full)
    }
}

/// Basis values at `position` for the default 25-mer probe length.
pub fn spline_basis(position: usize, df: usize) -> Result<Vec<f64>> {
    SplineBasis::new(df, DEFAULT_PROBE_LENGTH)?.eval(position)
}
