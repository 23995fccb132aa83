//! Dense row-major matrices and the handful of kernels the selectors need.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix buffer",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    context: "matrix row",
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Gathers the given rows (in the given order) into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (given as a dense
/// `n × n` row-major slice) by Cholesky factorisation. Returns `None` when
/// the factorisation hits a non-positive pivot.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Solves the SPD system, retrying with a small diagonal shift when the
/// matrix is numerically singular (collinear atoms with no ridge term).
fn solve_spd_shifted(a: &[f64], b: &[f64]) -> Vec<f64> {
    if let Some(x) = solve_spd(a, b) {
        return x;
    }
    let n = b.len();
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let mut shift = 1e-12 * trace.max(1e-300);
    let mut shifted = a.to_vec();
    loop {
        for i in 0..n {
            shifted[i * n + i] = a[i * n + i] + shift;
        }
        if let Some(x) = solve_spd(&shifted, b) {
            return x;
        }
        shift *= 10.0;
    }
}

/// Non-negative quadratic program `min wᵀQw − 2cᵀw` s.t. `w ≥ 0`, with `Q`
/// symmetric positive (semi)definite, solved by the Lawson–Hanson active-set
/// method expressed on the Gram matrix. With `Q = GᵀG + λI` and `c = Gᵀb`
/// this is non-negative ridge regression of `b` on the columns of `G`.
///
/// At the returned point the strictly positive coordinates equal the
/// unconstrained solve restricted to that support.
pub fn nnls_gram(q: &[f64], c: &[f64]) -> Vec<f64> {
    nnls_gram_warm(q, c, &vec![0.0; c.len()])
}

/// [`nnls_gram`] started from `w0`, which must be non-negative and equal
/// the restricted solve on its own positive support (for instance the
/// solution of a problem with fewer coordinates, padded with zeros).
pub fn nnls_gram_warm(q: &[f64], c: &[f64], w0: &[f64]) -> Vec<f64> {
    let n = c.len();
    debug_assert_eq!(w0.len(), n);
    let mut w = w0.to_vec();
    let mut passive: Vec<bool> = w.iter().map(|&v| v > 0.0).collect();
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let tol = 1e-13 * scale;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        // dual: c − Qw
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if passive[j] {
                continue;
            }
            let grad = c[j] - (0..n).map(|k| q[j * n + k] * w[k]).sum::<f64>();
            if grad > tol && best.is_none_or(|(_, g)| grad > g) {
                best = Some((j, grad));
            }
        }
        let Some((entering, _)) = best else { break };
        passive[entering] = true;

        loop {
            let support: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_restricted(q, c, &support);
            if z.iter().all(|&v| v > 0.0) {
                for (&j, &v) in support.iter().zip(&z) {
                    w[j] = v;
                }
                break;
            }
            // Step toward z until the first passive coordinate hits zero.
            let mut alpha = 1.0f64;
            for (&j, &v) in support.iter().zip(&z) {
                if v <= 0.0 {
                    let denom = w[j] - v;
                    if denom > 0.0 {
                        alpha = alpha.min(w[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (&j, &v) in support.iter().zip(&z) {
                w[j] += alpha * (v - w[j]);
            }
            for &j in &support {
                if w[j] <= 1e-15 * scale.max(1.0) {
                    w[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    w
}

fn solve_restricted(q: &[f64], c: &[f64], support: &[usize]) -> Vec<f64> {
    let n = c.len();
    let k = support.len();
    let mut sub = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (a, &i) in support.iter().enumerate() {
        rhs[a] = c[i];
        for (b, &j) in support.iter().enumerate() {
            sub[a * k + b] = q[i * n + j];
        }
    }
    solve_spd_shifted(&sub, &rhs)
}
