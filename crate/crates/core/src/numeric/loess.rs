//! Local linear loess with tricube weights.
//!
//! The smoother is evaluated exactly at a set of anchor abscissae (every
//! distinct `x`, or an even grid when there are more than [`MAX_ANCHORS`]
//! distinct values) and linearly interpolated in between. Outside the data
//! range the fit is held constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ANCHORS: usize = 1000;
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothFit {
    anchors: Vec<f64>,
    fitted: Vec<f64>,
    span: f64,
    degree: usize,
}

impl SmoothFit {
    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = &self.anchors;
        let last = a.len() - 1;
        if x <= a[0] {
            return self.fitted[0];
        }
        if x >= a[last] {
            return self.fitted[last];
        }
        // first anchor strictly greater than x
        let hi = a.partition_point(|&v| v <= x);
        let lo = hi - 1;
        let t = (x - a[lo]) / (a[hi] - a[lo]);
        self.fitted[lo] + t * (self.fitted[hi] - self.fitted[lo])
    }
}

#[inline]
fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let v = 1.0 - u * u * u;
        v * v * v
    }
}

pub fn loess_fit(x: &[f64], y: &[f64], span: f64) -> Result<SmoothFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "loess: {} abscissae but {} responses",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_POINTS,
            got: n,
        });
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::InvalidParameter(format!("loess span {span} outside (0, 1]")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("loess inputs must be finite".into()));
    }

    let mut pts: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();

    let mut distinct = xs.clone();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateAbscissae);
    }
    let anchors = if distinct.len() <= MAX_ANCHORS {
        distinct
    } else {
        let (lo, hi) = (xs[0], xs[n - 1]);
        let step = (hi - lo) / (MAX_ANCHORS - 1) as f64;
        let mut grid: Vec<f64> = (0..MAX_ANCHORS).map(|k| lo + step * k as f64).collect();
        grid[MAX_ANCHORS - 1] = hi;
        grid
    };

    let q = ((span * n as f64).floor() as usize).clamp(2, n);
    let fitted = anchors.iter().map(|&a| local_linear(&xs, &ys, a, q)).collect();
    Ok(SmoothFit {
        anchors,
        fitted,
        span,
        degree: 1,
    })
}

/// Local linear estimate at `a` from the `q` nearest neighbours in the sorted
/// abscissae `xs`.
fn local_linear(xs: &[f64], ys: &[f64], a: f64, q: usize) -> f64 {
    let n = xs.len();
    let start = xs.partition_point(|&v| v < a);
    let (mut lo, mut hi) = (start, start);
    while hi - lo < q {
        let take_left = if lo == 0 {
            false
        } else if hi == n {
            true
        } else {
            a - xs[lo - 1] <= xs[hi] - a
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let h = (a - xs[lo]).max(xs[hi - 1] - a);

    let (mut sw, mut swx, mut swy) = (0.0, 0.0, 0.0);
    let weights: Vec<f64> = (lo..hi)
        .map(|k| if h > 0.0 { tricube((xs[k] - a).abs() / h) } else { 1.0 })
        .collect();
    for (w, k) in weights.iter().zip(lo..hi) {
        sw += w;
        swx += w * xs[k];
        swy += w * ys[k];
    }
    let xbar = swx / sw;
    let ybar = swy / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (w, k) in weights.iter().zip(lo..hi) {
        let dx = xs[k] - xbar;
        sxx += w * dx * dx;
        sxy += w * dx * (ys[k] - ybar);
    }
    if sxx <= 1e-14 * h * h * sw {
        ybar
    } else {
        ybar + sxy / sxx * (a - xbar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force tricube WLS at one point: distances to every observation,
    /// bandwidth = q-th smallest distance, 2x2 normal equations by Cramer.
    fn wls_oracle(x: &[f64], y: &[f64], at: f64, span: f64) -> f64 {
        let n = x.len();
        let q = ((span * n as f64).floor() as usize).clamp(2, n);
        let mut d: Vec<f64> = x.iter().map(|v| (v - at).abs()).collect();
        d.sort_by(f64::total_cmp);
        let h = d[q - 1];
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (xi, yi) in x.iter().zip(y) {
            let u = (xi - at).abs() / h;
            let w = if u < 1.0 { (1.0 - u.powi(3)).powi(3) } else { 0.0 };
            s0 += w;
            s1 += w * xi;
            s2 += w * xi * xi;
            t0 += w * yi;
            t1 += w * xi * yi;
        }
        let det = s0 * s2 - s1 * s1;
        let b0 = (t0 * s2 - s1 * t1) / det;
        let b1 = (s0 * t1 - s1 * t0) / det;
        b0 + b1 * at
    }

    #[test]
    fn reproduces_affine_data() {
        let x: Vec<f64> = (0..50).map(|k| (k as f64 * 0.37).sin() * 4.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        for span in [0.1, 0.4, 1.0] {
            let fit = loess_fit(&x, &y, span).unwrap();
            for (a, f) in fit.anchors().iter().zip(fit.fitted()) {
                assert!(((f - (2.0 * a + 1.0)) / (2.0 * a + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_response() {
        let x: Vec<f64> = (0..30).map(|k| k as f64).collect();
        let fit = loess_fit(&x, &vec![3.5; 30], 0.3).unwrap();
        assert!(fit.fitted().iter().all(|f| (f - 3.5).abs() < 1e-12));
        assert!((fit.eval(-10.0) - 3.5).abs() < 1e-12);
        assert!((fit.eval(12.25) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn matches_pointwise_wls_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin() + 0.3 * rng.random_range(-1.0..1.0)).collect();
        let fit = loess_fit(&x, &y, 0.3).unwrap();
        for &xi in &x {
            let want = wls_oracle(&x, &y, xi, 0.3);
            let got = fit.eval(xi);
            assert!(((got - want) / want.abs().max(1e-3)).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_abscissae() {
        let x = vec![1.0; 12];
        let y: Vec<f64> = (0..12).map(|k| k as f64).collect();
        assert!(matches!(loess_fit(&x, &y, 0.5), Err(Error::DegenerateAbscissae)));
    }

    #[test]
    fn too_few_points() {
        let x: Vec<f64> = (0..5).map(|k| k as f64).collect();
        assert!(matches!(loess_fit(&x, &x, 0.5), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn thinned_grid_interpolates_between_anchors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..3000).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 2.0).collect();
        let fit = loess_fit(&x, &y, 0.2).unwrap();
        assert_eq!(fit.anchors().len(), MAX_ANCHORS);
        assert!(fit.anchors().windows(2).all(|w| w[0] < w[1]));
        for &xi in x.iter().take(100) {
            assert!((fit.eval(xi) - (0.5 * xi - 2.0)).abs() < 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn permutation_invariant(seed in 0u64..500, span in 0.2f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..40).map(|_| (rng.random_range(0..25) as f64) * 0.5).collect();
            let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut idx: Vec<usize> = (0..40).collect();
            idx.reverse();
            idx.rotate_left((seed % 40) as usize);
            let xp: Vec<f64> = idx.iter().map(|&k| x[k]).collect();
            let yp: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
            let a = loess_fit(&x, &y, span).unwrap();
            let b = loess_fit(&xp, &yp, span).unwrap();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
