//! Weighted least squares through a column-pivoted Householder QR.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows > 0 && row.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "row of length {} pushed onto {} columns",
                row.len(),
                self.cols
            )));
        }
        self.cols = row.len();
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

const RANK_TOL: f64 = 1e-10;

/// Minimizes `sum_i w_i (y_i - x_i' b)^2`.
pub fn weighted_least_squares(design: &Matrix, response: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let (m, p) = (design.rows(), design.cols());
    if response.len() != m || weights.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "design has {m} rows, response {} and weights {}",
            response.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
    }
    if p == 0 {
        return Ok(Vec::new());
    }

    // column-major copy of sqrt(W) X and sqrt(W) y
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..m).map(|i| design[(i, j)] * sw[i]).collect())
        .collect();
    let mut b: Vec<f64> = response.iter().zip(&sw).map(|(y, s)| y * s).collect();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();

    let steps = p.min(m);
    let mut rank = 0;
    let mut r00 = 0.0;
    for k in 0..steps {
        let piv = (k..p).max_by(|&x, &y| norms[x].total_cmp(&norms[y])).unwrap();
        a.swap(k, piv);
        norms.swap(k, piv);
        perm.swap(k, piv);

        let alpha = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if k == 0 {
            r00 = alpha;
        }
        if alpha <= RANK_TOL * r00 || alpha == 0.0 {
            break;
        }
        rank += 1;
        let sign = if a[k][k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = col.iter().zip(&v).map(|(c, vi)| c * vi).sum();
            let f = 2.0 * dot / vnorm2;
            col.iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
        };
        for col in a.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut b[k..]);
        for j in k + 1..p {
            norms[j] = a[j][k + 1..].iter().map(|x| x * x).sum();
        }
    }
    if rank < p {
        return Err(Error::SingularDesign { rank, columns: p });
    }

    let mut z = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[j][k] * z[j];
        }
        z[k] = s / a[k][k];
    }
    let mut coef = vec![0.0; p];
    for (k, &orig) in perm.iter().enumerate() {
        coef[orig] = z[k];
    }
    Ok(coef)
}
