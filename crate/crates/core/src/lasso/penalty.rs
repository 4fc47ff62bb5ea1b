use log::warn;
use serde::{Deserialize, Serialize};

use super::solver::{solve, SolverOptions};
use super::{LassoFit, LassoProblem};
use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// Penalty level and per-column loadings for one fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyLoadings {
    pub psi: Vec<f64>,
    pub lambda: f64,
    pub c: f64,
    pub gamma: f64,
    /// Number of loading estimates computed to reach `psi`.
    pub iterations: usize,
}

impl PenaltyLoadings {
    /// Loadings supplied by the caller rather than estimated.
    pub fn fixed(psi: Vec<f64>, lambda: f64) -> Self {
        Self {
            psi,
            lambda,
            c: f64::NAN,
            gamma: f64::NAN,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Slack constant in the penalty rule; 1.1 in the main analysis, 0.5
    /// for the robustness variant.
    pub c: f64,
    /// Tail probability; `None` means 0.1 / ln(n).
    pub gamma: Option<f64>,
    /// Fixed λ overriding the plug-in rule (0 disables selection).
    pub lambda: Option<f64>,
    /// Loading re-estimations after the initial pass.
    pub refinements: usize,
    /// Early stop once max_j |Δψ_j| / ψ_j falls below this.
    pub loading_tol: f64,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            c: 1.1,
            gamma: None,
            lambda: None,
            refinements: 2,
            loading_tol: 1e-4,
            solver: SolverOptions::default(),
        }
    }
}

impl PenaltyConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::default()
        }
    }
}

pub fn default_gamma(n: usize) -> f64 {
    0.1 / (n as f64).ln()
}

/// λ = 2c√n · Φ⁻¹(1 − γ/(2p)).
pub fn compute_penalty(n: usize, p: usize, c: f64, gamma: f64) -> Result<f64> {
    if n < 2 || p < 1 {
        return Err(Error::Config(format!("penalty needs n >= 2 and p >= 1, got n={n}, p={p}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("c must be positive, got {c}")));
    }
    let q = normal_quantile(1.0 - gamma / (2.0 * p as f64));
    Ok(2.0 * c * (n as f64).sqrt() * q)
}

/// ψ_j = sqrt((1/n) Σ_i w̃_ij² ê_i²) with w̃ the (centered, when the
/// problem has an intercept) columns.
pub fn loadings_from_residuals(prob: &LassoProblem<'_>, residuals: &[f64]) -> Vec<f64> {
    let n = prob.n() as f64;
    let (_, means, _) = prob.centering();
    let raw = |j: usize, weight: &dyn Fn(usize) -> f64| -> f64 {
        let m = means[j];
        (prob
            .column(j)
            .iter()
            .enumerate()
            .map(|(i, x)| (x - m) * (x - m) * weight(i))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let all_zero = residuals.iter().all(|&e| e == 0.0);
    if all_zero {
        warn!("zero residual vector: penalty loadings fall back to column norms");
    }
    (0..prob.p())
        .map(|j| {
            let psi = if all_zero {
                0.0
            } else {
                raw(j, &|i| residuals[i] * residuals[i])
            };
            if psi > 0.0 {
                psi
            } else {
                raw(j, &|_| 1.0)
            }
        })
        .collect()
}

/// Loadings from the residuals of `fit`, or from the demeaned response on
/// the initial pass.
pub fn estimate_loadings(
    prob: &LassoProblem<'_>,
    fit: Option<&LassoFit>,
    cfg: &PenaltyConfig,
) -> Result<PenaltyLoadings> {
    let residuals = match fit {
        Some(f) => f.residuals.clone(),
        None => {
            let (ic, _, ybar) = prob.centering();
            let shift = if ic.is_some() { ybar } else { 0.0 };
            prob.y().iter().map(|v| v - shift).collect()
        }
    };
    let n = prob.n();
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(n));
    let lambda = match cfg.lambda {
        Some(l) if l >= 0.0 && l.is_finite() => l,
        Some(l) => return Err(Error::Config(format!("invalid fixed lambda {l}"))),
        None => compute_penalty(n, prob.n_penalized().max(1), cfg.c, gamma)?,
    };
    Ok(PenaltyLoadings {
        psi: loadings_from_residuals(prob, &residuals),
        lambda,
        c: cfg.c,
        gamma,
        iterations: 1,
    })
}

/// Full data-driven fit: initial loadings from the demeaned response, then
/// `refinements` rounds of re-estimating loadings from lasso residuals and
/// refitting (warm started).
pub fn estimate(prob: &LassoProblem<'_>, cfg: &PenaltyConfig) -> Result<(LassoFit, PenaltyLoadings)> {
    let mut loads = estimate_loadings(prob, None, cfg)?;
    let mut fit = solve(prob, &loads, &cfg.solver, None)?;
    for _ in 0..cfg.refinements {
        let mut next = estimate_loadings(prob, Some(&fit), cfg)?;
        next.iterations = loads.iterations + 1;
        let change = (0..prob.p())
            .filter(|&j| prob.penalize()[j])
            .map(|j| (next.psi[j] - loads.psi[j]).abs() / loads.psi[j])
            .fold(0.0, f64::max);
        if change < cfg.loading_tol {
            break;
        }
        loads = next;
        fit = solve(prob, &loads, &cfg.solver, Some(&fit.coefficients))?;
    }
    fit.report.loading_iterations = loads.iterations;
    Ok((fit, loads))
}
