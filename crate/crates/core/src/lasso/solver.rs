use super::{LassoFit, LassoProblem, PenaltyLoadings, SolverReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once a full sweep moves no standardized coefficient by more
    /// than this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
        }
    }
}

/// Proximal map of `t·|·|`: sign(z)·max(|z| − t, 0).
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalised objective (1/n)‖y − Wb‖² + (λ/n) Σ_penalised ψ_j |b_j|.
pub fn objective(prob: &LassoProblem<'_>, b: &[f64], loads: &PenaltyLoadings) -> f64 {
    let r = prob.residuals(b);
    objective_from_residuals(prob, b, &r, loads)
}

fn objective_from_residuals(
    prob: &LassoProblem<'_>,
    b: &[f64],
    r: &[f64],
    loads: &PenaltyLoadings,
) -> f64 {
    let n = prob.n() as f64;
    let rss: f64 = r.iter().map(|v| v * v).sum();
    let pen: f64 = b
        .iter()
        .zip(prob.penalize())
        .zip(&loads.psi)
        .filter(|((_, &p), _)| p)
        .map(|((bj, _), psi)| psi * bj.abs())
        .sum();
    rss / n + loads.lambda * pen / n
}

/// Largest violation of the optimality conditions, in units of the
/// objective's gradient. Zero penalised coefficients need
/// |∇_j| ≤ (λ/n)ψ_j, nonzero ones ∇_j = −(λ/n)ψ_j·sign(b_j), and
/// unpenalised ones ∇_j = 0.
pub fn kkt_violation(
    prob: &LassoProblem<'_>,
    b: &[f64],
    residuals: &[f64],
    loads: &PenaltyLoadings,
) -> f64 {
    let n = prob.n() as f64;
    let mut worst: f64 = 0.0;
    for j in 0..prob.p() {
        let grad = -2.0 * crate::linalg::dot(prob.column(j), residuals) / n;
        let v = if !prob.penalize()[j] {
            grad.abs()
        } else {
            let bound = loads.lambda * loads.psi[j] / n;
            if b[j] == 0.0 {
                (grad.abs() - bound).max(0.0)
            } else {
                (grad + bound * b[j].signum()).abs()
            }
        };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent with active-set sweeps.
pub fn fit_lasso(
    prob: &LassoProblem<'_>,
    loads: &PenaltyLoadings,
    opts: &SolverOptions,
) -> Result<LassoFit> {
    solve(prob, loads, opts, None)
}

pub(crate) fn solve(
    prob: &LassoProblem<'_>,
    loads: &PenaltyLoadings,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<LassoFit> {
    let p = prob.p();
    if loads.psi.len() != p {
        return Err(Error::Config(format!(
            "{} loadings for {p} columns",
            loads.psi.len()
        )));
    }
    if !(loads.lambda >= 0.0 && loads.lambda.is_finite()) {
        return Err(Error::Config(format!("invalid lambda {}", loads.lambda)));
    }
    for j in 0..p {
        if prob.penalize()[j] && !(loads.psi[j] > 0.0 && loads.psi[j].is_finite()) {
            return Err(Error::Config(format!(
                "loading for penalised column {j} must be positive, got {}",
                loads.psi[j]
            )));
        }
    }

    let (ic, means, ybar) = prob.centering();
    let sq: Vec<f64> = (0..p)
        .map(|j| {
            if Some(j) == ic {
                0.0
            } else {
                prob.column(j)
                    .iter()
                    .map(|x| (x - means[j]) * (x - means[j]))
                    .sum()
            }
        })
        .collect();
    let scale: Vec<f64> = sq.iter().map(|a| a.sqrt()).collect();
    let thresh: Vec<f64> = (0..p)
        .map(|j| {
            if prob.penalize()[j] {
                0.5 * loads.lambda * loads.psi[j]
            } else {
                0.0
            }
        })
        .collect();
    let live: Vec<usize> = (0..p).filter(|&j| sq[j] > 0.0).collect();

    let mut b = vec![0.0; p];
    if let Some(s) = start {
        for &j in &live {
            b[j] = s[j];
        }
    }
    let mut r: Vec<f64> = prob.y().iter().map(|v| v - ybar).collect();
    for &j in &live {
        if b[j] != 0.0 {
            for (ri, x) in r.iter_mut().zip(prob.column(j)) {
                *ri -= b[j] * (x - means[j]);
            }
        }
    }

    let update = |j: usize, b: &mut [f64], r: &mut [f64]| -> f64 {
        let col = prob.column(j);
        let m = means[j];
        let rho: f64 = col
            .iter()
            .zip(r.iter())
            .map(|(x, ri)| (x - m) * ri)
            .sum::<f64>()
            + sq[j] * b[j];
        let new = if prob.penalize()[j] {
            soft_threshold(rho, thresh[j]) / sq[j]
        } else {
            rho / sq[j]
        };
        let delta = new - b[j];
        if delta != 0.0 {
            for (ri, x) in r.iter_mut().zip(col) {
                *ri -= delta * (x - m);
            }
            b[j] = new;
        }
        delta.abs() * scale[j]
    };

    let mut sweeps = 0usize;
    let mut trace = Vec::new();
    let centered_obj = |b: &[f64], r: &[f64]| objective_from_residuals(prob, b, r, loads);
    let finish_error = |b: &[f64], sweeps: usize| {
        let full = with_intercept(prob, b, ic, &means, ybar);
        let res = prob.residuals(&full);
        Error::NonConvergence {
            sweeps,
            kkt_violation: kkt_violation(prob, &full, &res, loads),
            last_iterate: full,
        }
    };

    // The cap counts full cycles over every column; the active-set passes
    // between them are bounded by the same number per cycle.
    let mut full = 0usize;
    'outer: loop {
        let mut change: f64 = 0.0;
        for &j in &live {
            change = change.max(update(j, &mut b, &mut r));
        }
        sweeps += 1;
        full += 1;
        trace.push(centered_obj(&b, &r));
        if change < opts.tol {
            break 'outer;
        }
        if full >= opts.max_sweeps {
            return Err(finish_error(&b, full));
        }
        let active: Vec<usize> = live
            .iter()
            .copied()
            .filter(|&j| b[j] != 0.0 || !prob.penalize()[j])
            .collect();
        for _ in 0..opts.max_sweeps {
            let mut change: f64 = 0.0;
            for &j in &active {
                change = change.max(update(j, &mut b, &mut r));
            }
            sweeps += 1;
            trace.push(centered_obj(&b, &r));
            if change < opts.tol {
                break;
            }
        }
    }

    let coefficients = with_intercept(prob, &b, ic, &means, ybar);
    let residuals = prob.residuals(&coefficients);
    let objective = objective_from_residuals(prob, &coefficients, &residuals, loads);
    let support: Vec<usize> = (0..p)
        .filter(|&j| !prob.penalize()[j] || coefficients[j] != 0.0)
        .collect();
    let report = SolverReport {
        sweeps,
        kkt_violation: kkt_violation(prob, &coefficients, &residuals, loads),
        support_size: support.len(),
        lambda: loads.lambda,
        loading_iterations: loads.iterations,
        objective_trace: trace,
    };
    Ok(LassoFit {
        coefficients,
        support,
        objective,
        residuals,
        post: None,
        report,
    })
}

fn with_intercept(
    prob: &LassoProblem<'_>,
    b: &[f64],
    ic: Option<usize>,
    means: &[f64],
    ybar: f64,
) -> Vec<f64> {
    let mut out = b.to_vec();
    if let Some(ic) = ic {
        let shift: f64 = means.iter().zip(b).map(|(m, bj)| m * bj).sum();
        out[ic] = (ybar - shift) / prob.column(ic)[0];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::PenaltyLoadings;

    fn loads(p: usize, lambda: f64) -> PenaltyLoadings {
        PenaltyLoadings::fixed(vec![1.0; p], lambda)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
    }

    #[test]
    fn zero_lambda_recovers_least_squares() {
        let ones = vec![1.0; 6];
        let x1 = vec![0.5, 1.0, -1.0, 2.0, 0.0, 3.0];
        let x2 = vec![1.0, -2.0, 0.5, 0.0, 1.5, -1.0];
        let y: Vec<f64> = (0..6)
            .map(|i| 1.0 + 2.0 * x1[i] - 0.5 * x2[i] + [0.1, -0.2, 0.05, 0.0, 0.3, -0.1][i])
            .collect();
        let prob = LassoProblem::new(
            y.clone(),
            vec![&ones, &x1, &x2],
            vec![false, true, true],
        )
        .unwrap();
        let fit = fit_lasso(&prob, &loads(3, 0.0), &SolverOptions::default()).unwrap();
        let w = crate::linalg::matrix_from_columns(6, &[&ones, &x1, &x2]);
        let ols = crate::linalg::least_squares(&w, &nalgebra::DVector::from_vec(y));
        for j in 0..3 {
            assert!((fit.coefficients[j] - ols.coefficients[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn lambda_above_max_zeroes_everything() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0];
        let x2 = vec![1.0, -1.0, 1.0, -1.0];
        let y = vec![2.0, 3.5, 6.0, 8.5];
        let prob = LassoProblem::new(y.clone(), vec![&x1, &x2], vec![true, true]).unwrap();
        let lmax = [&x1, &x2]
            .iter()
            .map(|c| (2.0 * crate::linalg::dot(c, &y)).abs())
            .fold(0.0, f64::max);
        let fit = fit_lasso(&prob, &loads(2, lmax * 1.0001), &SolverOptions::default()).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert!(fit.support.is_empty());
        let fit = fit_lasso(&prob, &loads(2, lmax * 0.9), &SolverOptions::default()).unwrap();
        assert!(!fit.support.is_empty());
    }

    #[test]
    fn non_positive_loading_rejected() {
        let x1 = vec![1.0, 2.0, 3.0];
        let prob = LassoProblem::new(vec![1.0, 2.0, 3.0], vec![&x1], vec![true]).unwrap();
        let l = PenaltyLoadings::fixed(vec![0.0], 1.0);
        assert!(matches!(
            fit_lasso(&prob, &l, &SolverOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweep_cap_reports_last_iterate() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let x2 = vec![1.01, 1.99, 3.02, 4.0, 4.98];
        // opposite-signed effects on nearly collinear columns zig-zag slowly
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 3.0 * a - 2.0 * b).collect();
        let prob = LassoProblem::new(y, vec![&x1, &x2], vec![true, true]).unwrap();
        let opts = SolverOptions {
            tol: 1e-14,
            max_sweeps: 3,
        };
        match fit_lasso(&prob, &loads(2, 1e-3), &opts) {
            Err(Error::NonConvergence {
                sweeps,
                last_iterate,
                kkt_violation,
            }) => {
                assert_eq!(sweeps, 3);
                assert_eq!(last_iterate.len(), 2);
                assert!(kkt_violation > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        let n = 30;
        let cols: Vec<Vec<f64>> = (0..6)
            .map(|j| (0..n).map(|i| ((i * (j + 3)) as f64 * 0.37).sin()).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|i| cols[0][i] - 2.0 * cols[3][i] + 0.1 * (i as f64).cos()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let prob = LassoProblem::new(y, refs, vec![true; 6]).unwrap();
        let fit = fit_lasso(&prob, &loads(6, 2.0), &SolverOptions::default()).unwrap();
        for w in fit.report.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
        }
        assert!(fit.report.kkt_violation < 1e-6);
    }
}
