use nalgebra::{DMatrix, DVector};

use crate::lasso::{soft_threshold, LassoProblem, PenaltyLoadings};
use crate::linalg;

/// Proximal gradient (ISTA) on (1/n)‖y − Wb‖² + (λ/n) Σ ψ_j |b_j| from
/// b = 0. `step` defaults to 1/L with L = 2σ_max(W)²/n. Meant for tiny
/// problems as an independent check on the coordinate descent solver.
pub fn prox_oracle(
    prob: &LassoProblem<'_>,
    loads: &PenaltyLoadings,
    iters: usize,
    step: Option<f64>,
) -> Vec<f64> {
    let n = prob.n();
    let nf = n as f64;
    let w = linalg::matrix_from_columns(n, prob.columns());
    let y = DVector::from_column_slice(prob.y());
    let gram: DMatrix<f64> = w.tr_mul(&w) * (2.0 / nf);
    let wty: DVector<f64> = w.tr_mul(&y) * (2.0 / nf);
    let step = step.unwrap_or_else(|| {
        let l = gram.clone().symmetric_eigenvalues().max();
        1.0 / l
    });
    let thresholds: Vec<f64> = (0..prob.p())
        .map(|j| {
            if prob.penalize()[j] {
                step * loads.lambda * loads.psi[j] / nf
            } else {
                0.0
            }
        })
        .collect();
    let mut b = DVector::zeros(prob.p());
    for _ in 0..iters {
        let grad = &gram * &b - &wty;
        let v = &b - grad * step;
        for j in 0..prob.p() {
            b[j] = soft_threshold(v[j], thresholds[j]);
        }
    }
    b.iter().copied().collect()
}
