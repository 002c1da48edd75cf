//! Numeric kernels shared by the statistical modules.

pub mod loess;
pub mod normal;
pub mod spline;
pub mod wilcoxon;
pub mod wls;

pub use loess::{loess_fit, SmoothFit};
pub use normal::{normal_cdf, normal_quantile, normal_sf};
pub use spline::{spline_basis, SplineBasis};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_p, SignedRankTest};
pub use wls::{weighted_least_squares, Matrix};

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let h = (s.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}
