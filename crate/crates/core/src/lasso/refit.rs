use log::warn;
use nalgebra::DVector;

use super::{LassoFit, LassoProblem};
use crate::linalg;

/// Least squares restricted to the lasso support. Coefficients off the
/// support are zero. Rank-deficient or wide supports get the minimum-norm
/// solution and a warning.
pub fn post_lasso_refit(prob: &LassoProblem<'_>, fit: &LassoFit) -> LassoFit {
    let n = prob.n();
    let mut post = vec![0.0; prob.p()];
    if !fit.support.is_empty() {
        if n < fit.support.len() {
            warn!(
                "post-lasso: n = {n} < support size {}, refit is minimum-norm",
                fit.support.len()
            );
        }
        let cols: Vec<&[f64]> = fit.support.iter().map(|&j| prob.column(j)).collect();
        let w = linalg::matrix_from_columns(n, &cols);
        let ls = linalg::least_squares(&w, &DVector::from_column_slice(prob.y()));
        linalg::warn_min_norm("post-lasso", &ls, cols.len());
        for (k, &j) in fit.support.iter().enumerate() {
            post[j] = ls.coefficients[k];
        }
    }
    LassoFit {
        post: Some(post),
        ..fit.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::{fit_lasso, PenaltyLoadings, SolverOptions};

    #[test]
    fn empty_support_with_intercept_gives_mean() {
        let ones = vec![1.0; 5];
        let x = vec![0.1, -0.2, 0.3, 0.0, -0.1];
        let y = vec![1.0, 2.0, 3.0, 4.0, 10.0];
        let prob = LassoProblem::new(y, vec![&ones, &x], vec![false, true]).unwrap();
        let loads = PenaltyLoadings::fixed(vec![1.0, 1.0], 1e6);
        let fit = fit_lasso(&prob, &loads, &SolverOptions::default()).unwrap();
        assert_eq!(fit.support, vec![0]);
        let refit = post_lasso_refit(&prob, &fit);
        let post = refit.post.unwrap();
        assert!((post[0] - 4.0).abs() < 1e-12);
        assert_eq!(post[1], 0.0);
    }

    #[test]
    fn refit_residuals_orthogonal_to_support() {
        let n = 12;
        let ones = vec![1.0; n];
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 + 3.0 * a[i] + 0.2 * (i as f64).sqrt()).collect();
        let prob = LassoProblem::new(y, vec![&ones, &a, &b], vec![false, true, true]).unwrap();
        let loads = PenaltyLoadings::fixed(vec![1.0; 3], 0.5);
        let fit = post_lasso_refit(
            &prob,
            &fit_lasso(&prob, &loads, &SolverOptions::default()).unwrap(),
        );
        let r = prob.residuals(fit.post.as_ref().unwrap());
        for &j in &fit.support {
            assert!(linalg::dot(prob.column(j), &r).abs() < 1e-8);
        }
    }
}
