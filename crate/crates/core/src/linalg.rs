//! Dense least-squares helpers shared by the refit, decomposition and
//! sandwich code.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance below which a Gram-Schmidt residual counts as zero.
pub const COLLINEARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub rank: usize,
    /// True when the design was rank deficient and the minimum-norm
    /// solution was returned.
    pub min_norm: bool,
}

/// Ordinary least squares through Householder QR, falling back to the
/// SVD minimum-norm solution for rank-deficient or wide designs.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquares {
    let (n, k) = x.shape();
    if k == 0 {
        return LeastSquares {
            coefficients: DVector::zeros(0),
            rank: 0,
            min_norm: false,
        };
    }
    if n >= k {
        let qr = x.clone().qr();
        let r = qr.r();
        let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let diag_min = (0..k).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if diag_max > 0.0 && diag_min > 1e-10 * diag_max {
            let mut qty = y.clone();
            qr.q_tr_mul(&mut qty);
            let head = qty.rows(0, k).into_owned();
            if let Some(beta) = r.solve_upper_triangular(&head) {
                return LeastSquares {
                    coefficients: beta,
                    rank: k,
                    min_norm: false,
                };
            }
        }
    }
    min_norm_solution(x, y)
}

fn min_norm_solution(x: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquares {
    let (n, k) = x.shape();
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = smax * (n.max(k) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let coefficients = svd
        .solve(y, eps)
        .unwrap_or_else(|_| DVector::zeros(k));
    LeastSquares {
        coefficients,
        rank,
        min_norm: true,
    }
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    match m.clone().cholesky() {
        Some(ch) => {
            let inv = ch.inverse();
            if inv.iter().all(|v| v.is_finite()) {
                Ok(inv)
            } else {
                Err(Error::Singular {
                    what: what.to_string(),
                    condition: condition_number(m),
                })
            }
        }
        None => Err(Error::Singular {
            what: what.to_string(),
            condition: condition_number(m),
        }),
    }
}

/// Incremental orthonormal basis used to decide, in a fixed order, which
/// columns add rank to a design.
#[derive(Debug, Clone)]
pub struct IndependenceBasis {
    n: usize,
    basis: Vec<Vec<f64>>,
}

impl IndependenceBasis {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            basis: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Adds `col` if it is not in the span of the columns accepted so far.
    /// Returns whether it was accepted.
    pub fn try_add(&mut self, col: &[f64]) -> bool {
        debug_assert_eq!(col.len(), self.n);
        let norm0 = dot(col, col).sqrt();
        if norm0 == 0.0 || !norm0.is_finite() {
            return false;
        }
        let mut v: Vec<f64> = col.iter().map(|x| x / norm0).collect();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for q in &self.basis {
                let proj = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= COLLINEARITY_TOL {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        self.basis.push(v);
        true
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Whether a column is constant up to floating point noise.
pub fn is_constant(v: &[f64]) -> bool {
    match v.first() {
        None => true,
        Some(&first) => v.iter().all(|&x| x == first),
    }
}

/// Builds an n×k matrix from borrowed column slices.
pub fn matrix_from_columns(n: usize, cols: &[&[f64]]) -> DMatrix<f64> {
    let mut data = Vec::with_capacity(n * cols.len());
    for c in cols {
        debug_assert_eq!(c.len(), n);
        data.extend_from_slice(c);
    }
    DMatrix::from_vec(n, cols.len(), data)
}

/// Column `j` of a column-major matrix as a contiguous slice.
pub fn column(m: &DMatrix<f64>, j: usize) -> &[f64] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

pub(crate) fn warn_min_norm(context: &str, ls: &LeastSquares, ncols: usize) {
    if ls.min_norm {
        warn!(
            "{context}: design rank {} < {ncols} columns, using minimum-norm solution",
            ls.rank
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_matches_normal_equations() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let ls = least_squares(&x, &y);
        assert!(!ls.min_norm);
        assert!((ls.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((ls.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_gives_min_norm() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let ls = least_squares(&x, &y);
        assert!(ls.min_norm);
        assert_eq!(ls.rank, 1);
        assert!((ls.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((ls.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn basis_rejects_dependent_columns() {
        let mut b = IndependenceBasis::new(3);
        assert!(b.try_add(&[1.0, 0.0, 1.0]));
        assert!(b.try_add(&[0.0, 1.0, 0.0]));
        assert!(!b.try_add(&[2.0, 3.0, 2.0]));
        assert!(!b.try_add(&[0.0, 0.0, 0.0]));
        assert!(b.try_add(&[0.0, 0.0, 1.0]));
        assert_eq!(b.rank(), 3);
    }
}
