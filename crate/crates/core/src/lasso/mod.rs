//! Weighted ℓ1-penalised least squares.
//!
//! The estimator minimises
//!
//! ```text
//! (1/n) Σ_i (y_i − w_i'b)² + (λ/n) Σ_j ψ_j |b_j|
//! ```
//!
//! over `b`, where only columns flagged in `penalize` carry a penalty. The
//! penalty level λ follows a plug-in rule and the loadings ψ are estimated
//! from residuals, which makes the procedure valid under heteroscedastic
//! noise. See [`estimate`] for the full iterated procedure.

mod penalty;
mod refit;
mod solver;

pub use penalty::{
    compute_penalty, default_gamma, estimate, estimate_loadings, loadings_from_residuals,
    PenaltyConfig, PenaltyLoadings,
};
pub use refit::post_lasso_refit;
pub use solver::{fit_lasso, kkt_violation, objective, soft_threshold, SolverOptions};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// A least-squares problem over borrowed design columns.
#[derive(Debug, Clone)]
pub struct LassoProblem<'a> {
    y: Vec<f64>,
    columns: Vec<&'a [f64]>,
    penalize: Vec<bool>,
}

impl<'a> LassoProblem<'a> {
    pub fn new(y: Vec<f64>, columns: Vec<&'a [f64]>, penalize: Vec<bool>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::Config(format!("lasso needs n >= 2, got {n}")));
        }
        if columns.is_empty() {
            return Err(Error::Config("lasso needs at least one column".into()));
        }
        if penalize.len() != columns.len() {
            return Err(Error::Config(format!(
                "penalty mask has {} entries for {} columns",
                penalize.len(),
                columns.len()
            )));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Config(format!(
                    "column {j} has {} rows, response has {n}",
                    c.len()
                )));
            }
            if penalize[j] && c.iter().all(|&v| v == 0.0) {
                return Err(Error::Data(format!("penalised column {j} is identically zero")));
            }
        }
        Ok(Self {
            y,
            columns,
            penalize,
        })
    }

    pub fn from_matrix(
        y: Vec<f64>,
        w: &'a nalgebra::DMatrix<f64>,
        penalize: Vec<bool>,
    ) -> Result<Self> {
        let cols = (0..w.ncols()).map(|j| linalg::column(w, j)).collect();
        Self::new(y, cols, penalize)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &'a [f64] {
        self.columns[j]
    }

    pub fn columns(&self) -> &[&'a [f64]] {
        &self.columns
    }

    pub fn penalize(&self) -> &[bool] {
        &self.penalize
    }

    pub fn n_penalized(&self) -> usize {
        self.penalize.iter().filter(|&&b| b).count()
    }

    /// First unpenalised, nonzero constant column: the intercept. When one
    /// exists, the solver centers the response and all other columns.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.p()).find(|&j| {
            !self.penalize[j] && self.columns[j][0] != 0.0 && linalg::is_constant(self.columns[j])
        })
    }

    /// Column means used for centering (zero everywhere without intercept).
    pub(crate) fn centering(&self) -> (Option<usize>, Vec<f64>, f64) {
        match self.intercept_column() {
            Some(ic) => {
                let means = self
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(j, c)| if j == ic { 0.0 } else { linalg::mean(c) })
                    .collect();
                (Some(ic), means, linalg::mean(&self.y))
            }
            None => (None, vec![0.0; self.p()], 0.0),
        }
    }

    /// y − W b.
    pub fn residuals(&self, b: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                for (ri, xi) in r.iter_mut().zip(self.columns[j]) {
                    *ri -= bj * xi;
                }
            }
        }
        r
    }
}

/// Solver diagnostics for one fit.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverReport {
    pub sweeps: usize,
    pub kkt_violation: f64,
    pub support_size: usize,
    pub lambda: f64,
    pub loading_iterations: usize,
    /// Penalised objective after each sweep.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Coefficients on the original column scale.
    pub coefficients: Vec<f64>,
    /// Nonzero penalised columns plus every unpenalised column, ascending.
    pub support: Vec<usize>,
    pub objective: f64,
    pub residuals: Vec<f64>,
    /// Least-squares refit on the support, when requested.
    pub post: Option<Vec<f64>>,
    pub report: SolverReport,
}
