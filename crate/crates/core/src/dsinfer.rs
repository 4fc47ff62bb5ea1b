//! Post-double-selection inference on the interaction coefficients β in
//!
//! ```text
//! y_i = (d_i x_i)'β + z_i'δ + ε_i
//! ```
//!
//! Controls are chosen by an outcome lasso (y on Z) and one auxiliary lasso
//! per target regressor (d·x_j on Z and the other targets). The union of
//! selected controls enters a final least-squares fit together with every
//! target, and the covariance of β̂ is the HC1 sandwich.

use std::collections::BTreeSet;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{score_covariance, score_matrix, JointTestResult};
use crate::dataprep::{ColumnLabel, ModelFrame};
use crate::error::{Error, Result};
use crate::lasso::{self, LassoProblem, PenaltyConfig, SolverReport};
use crate::linalg::{self, IndependenceBasis};
use crate::par::Execution;
use crate::report::{quantile_curve, QuantileCurve};
use crate::stats::two_sided_z;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Double,
    /// Outcome lasso only, with the targets included unpenalized. This is
    /// the naive comparison estimator; it is not valid after selection.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DsConfig {
    pub penalty: PenaltyConfig,
    /// Penalize the treatment main effect d when it acts as a control in
    /// the auxiliary regressions of the other targets.
    pub penalize_treatment_main: bool,
    pub selection: Selection,
    #[serde(skip)]
    pub execution: Execution,
}

/// Diagnostics for one selection regression.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionStep {
    /// "outcome" or the target label.
    pub equation: String,
    pub lambda: f64,
    /// Selected control columns (indices into Z).
    pub selected: Vec<usize>,
    pub solver: SolverReport,
}

#[derive(Debug, Clone)]
pub struct DoubleSelectionFit {
    pub n: usize,
    pub target_labels: Vec<ColumnLabel>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    /// Covariance of β̂ on the coefficient scale (Ω̂/n).
    pub omega: DMatrix<f64>,
    /// Ω̂, the covariance of √n(β̂ − β).
    pub omega_asymptotic: DMatrix<f64>,
    /// Influence rows of the targets (n × p1); (1/n)Ψ'Ψ = Ω̂.
    pub scores: DMatrix<f64>,
    pub outcome_support: Vec<usize>,
    pub per_target_supports: Vec<Vec<usize>>,
    pub union_support: Vec<usize>,
    /// Union columns retained in the refit, and those dropped as collinear.
    pub controls: Vec<usize>,
    pub dropped_controls: Vec<usize>,
    pub control_labels: Vec<ColumnLabel>,
    pub control_coefficients: Vec<f64>,
    pub refit_n_params: usize,
    pub residuals: Vec<f64>,
    pub diagnostics: Vec<SelectionStep>,
}

impl DoubleSelectionFit {
    pub fn p1(&self) -> usize {
        self.beta.len()
    }
}

fn z_penalty_mask(z: &DMatrix<f64>) -> Vec<bool> {
    (0..z.ncols())
        .map(|j| !linalg::is_constant(linalg::column(z, j)))
        .collect()
}

fn selection_step(
    equation: String,
    prob: &LassoProblem<'_>,
    cfg: &PenaltyConfig,
    p2: usize,
) -> Result<SelectionStep> {
    let (fit, loads) = lasso::estimate(prob, cfg)?;
    let selected = fit.support.iter().copied().filter(|&j| j < p2).collect();
    Ok(SelectionStep {
        equation,
        lambda: loads.lambda,
        selected,
        solver: fit.report,
    })
}

pub fn double_selection(frame: &ModelFrame, cfg: &DsConfig) -> Result<DoubleSelectionFit> {
    let n = frame.n();
    let (p1, p2) = (frame.p1(), frame.p2());
    let t = frame.targets();
    let t_cols: Vec<&[f64]> = (0..p1).map(|j| linalg::column(&t, j)).collect();
    let z_cols: Vec<&[f64]> = (0..p2).map(|j| linalg::column(&frame.z, j)).collect();
    let z_pen = z_penalty_mask(&frame.z);
    let target_names: Vec<String> = frame
        .x_labels
        .iter()
        .map(|l| target_name(l))
        .collect();

    let mut diagnostics = Vec::with_capacity(p1 + 1);
    let (outcome_support, per_target_supports) = match cfg.selection {
        Selection::Double => {
            let prob = LassoProblem::new(frame.y.clone(), z_cols.clone(), z_pen.clone())?;
            let outcome = selection_step("outcome".into(), &prob, &cfg.penalty, p2)?;
            let treatment_main: Vec<bool> = (0..p1)
                .map(|j| linalg::is_constant(linalg::column(&frame.x, j)))
                .collect();
            let aux: Vec<Result<SelectionStep>> = cfg.execution.map_range(p1, |j| {
                let mut cols = z_cols.clone();
                let mut pen = z_pen.clone();
                for k in (0..p1).filter(|&k| k != j) {
                    cols.push(t_cols[k]);
                    pen.push(cfg.penalize_treatment_main || !treatment_main[k]);
                }
                let prob = LassoProblem::new(t_cols[j].to_vec(), cols, pen)?;
                selection_step(target_names[j].clone(), &prob, &cfg.penalty, p2)
            });
            let aux = aux.into_iter().collect::<Result<Vec<_>>>()?;
            let supports = aux.iter().map(|s| s.selected.clone()).collect();
            let out = outcome.selected.clone();
            diagnostics.push(outcome);
            diagnostics.extend(aux);
            (out, supports)
        }
        Selection::Single => {
            let mut cols = z_cols.clone();
            let mut pen = z_pen.clone();
            cols.extend(t_cols.iter().copied());
            pen.extend(std::iter::repeat_n(false, p1));
            let prob = LassoProblem::new(frame.y.clone(), cols, pen)?;
            let outcome = selection_step("outcome".into(), &prob, &cfg.penalty, p2)?;
            let out = outcome.selected.clone();
            diagnostics.push(outcome);
            (out, Vec::new())
        }
    };

    let union: BTreeSet<usize> = outcome_support
        .iter()
        .chain(per_target_supports.iter().flatten())
        .copied()
        .collect();
    let union_support: Vec<usize> = union.into_iter().collect();
    debug!(
        "selection: outcome {} controls, union {} of {p2}",
        outcome_support.len(),
        union_support.len()
    );

    let mut basis = IndependenceBasis::new(n);
    let mut controls = Vec::new();
    let mut dropped_controls = Vec::new();
    for &j in &union_support {
        if basis.try_add(z_cols[j]) {
            controls.push(j);
        } else {
            dropped_controls.push(j);
        }
    }
    if !dropped_controls.is_empty() {
        let names: Vec<String> = dropped_controls
            .iter()
            .map(|&j| frame.z_labels[j].to_string())
            .collect();
        warn!("dropped collinear controls from the refit: {}", names.join(", "));
    }
    // saturation first: once the controls span almost everything, every
    // target would look collinear
    let k = p1 + controls.len();
    if n <= k {
        return Err(Error::Numerical(format!(
            "refit needs n > k, got n = {n}, k = {k} ({p1} targets, {} controls)",
            controls.len()
        )));
    }
    for j in 0..p1 {
        if !basis.try_add(t_cols[j]) {
            return Err(Error::CollinearTarget(target_names[j].clone()));
        }
    }
    let mut g_cols: Vec<&[f64]> = t_cols.clone();
    g_cols.extend(controls.iter().map(|&j| z_cols[j]));
    let g = linalg::matrix_from_columns(n, &g_cols);
    let ls = linalg::least_squares(&g, &DVector::from_column_slice(&frame.y));
    let coef = ls.coefficients;
    let fitted = &g * &coef;
    let residuals: Vec<f64> = frame.y.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect();

    let targets: Vec<usize> = (0..p1).collect();
    let scores = score_matrix(&g, &residuals, &targets)?;
    let omega_asymptotic = score_covariance(&scores);
    let omega = &omega_asymptotic / n as f64;
    let se = (0..p1).map(|j| omega[(j, j)].max(0.0).sqrt()).collect();

    Ok(DoubleSelectionFit {
        n,
        target_labels: frame.x_labels.clone(),
        beta: coef.rows(0, p1).iter().copied().collect(),
        se,
        omega,
        omega_asymptotic,
        scores,
        outcome_support,
        per_target_supports,
        union_support,
        control_labels: controls.iter().map(|&j| frame.z_labels[j].clone()).collect(),
        control_coefficients: coef.rows(p1, controls.len()).iter().copied().collect(),
        controls,
        dropped_controls,
        refit_n_params: k,
        residuals,
        diagnostics,
    })
}

/// Display name of the target d·x_j.
pub fn target_name(label: &ColumnLabel) -> String {
    if label.is_intercept() {
        "treatment".to_string()
    } else {
        format!("treatment x {label}")
    }
}

/// HC1 sandwich covariance of the `targets` block of an OLS fit on `g`,
/// on the coefficient scale.
pub fn robust_vcov(g: &DMatrix<f64>, residuals: &[f64], targets: &[usize]) -> Result<DMatrix<f64>> {
    let scores = score_matrix(g, residuals, targets)?;
    Ok(score_covariance(&scores) / g.nrows() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectProfile {
    /// β̂(x_i) = x_i'β̂ on the log scale.
    pub effects: Vec<f64>,
    pub se_pointwise: Vec<f64>,
    /// Pointwise normal critical value times the standard error.
    pub pointwise_halfwidth: Vec<f64>,
    /// Simultaneous critical value times the standard error.
    pub band_halfwidth: Vec<f64>,
    pub cv: f64,
    pub significant_negative: Vec<bool>,
    pub significant_positive: Vec<bool>,
    pub quantiles: QuantileCurve,
}

/// Effects, pointwise SEs and simultaneous bands for each row of `x`. The
/// band uses max(cv, z) so it always contains the pointwise band.
pub fn effect_profile(fit: &DoubleSelectionFit, x: &DMatrix<f64>, cv: f64, level: f64) -> EffectProfile {
    assert!(cv >= 0.0, "critical value must be nonnegative");
    assert_eq!(x.ncols(), fit.p1(), "profile rows must have p1 columns");
    let z = two_sided_z(level);
    let cv = cv.max(z);
    let beta = DVector::from_column_slice(&fit.beta);
    let effects: Vec<f64> = (x * &beta).iter().copied().collect();
    let se_pointwise: Vec<f64> = x
        .row_iter()
        .map(|r| {
            let xi = r.transpose();
            (xi.transpose() * &fit.omega * &xi)[(0, 0)].max(0.0).sqrt()
        })
        .collect();
    let band_halfwidth: Vec<f64> = se_pointwise.iter().map(|s| cv * s).collect();
    let significant_negative = effects
        .iter()
        .zip(&band_halfwidth)
        .map(|(e, h)| e + h < 0.0)
        .collect();
    let significant_positive = effects
        .iter()
        .zip(&band_halfwidth)
        .map(|(e, h)| e - h > 0.0)
        .collect();
    let mut profile = EffectProfile {
        pointwise_halfwidth: se_pointwise.iter().map(|s| z * s).collect(),
        effects,
        se_pointwise,
        band_halfwidth,
        cv,
        significant_negative,
        significant_positive,
        quantiles: QuantileCurve::default(),
    };
    if !profile.effects.is_empty() {
        profile.quantiles = quantile_curve(&profile, &crate::report::default_grid());
    }
    profile
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub sim_lower: f64,
    pub sim_upper: f64,
    /// Simultaneous interval excludes zero.
    pub significant: bool,
}

/// One row per target, whatever its significance. Negative estimates mean
/// a larger gap.
pub fn marginal_effects_table(fit: &DoubleSelectionFit, joint: &JointTestResult) -> Vec<EffectRow> {
    let z = two_sided_z(joint.level);
    let cv = joint.cv_coefficients.max(z);
    (0..fit.p1())
        .map(|j| {
            let (b, s) = (fit.beta[j], fit.se[j]);
            EffectRow {
                label: fit.target_labels[j].to_string(),
                estimate: b,
                se: s,
                ci_lower: b - z * s,
                ci_upper: b + z * s,
                sim_lower: b - cv * s,
                sim_upper: b + cv * s,
                significant: s > 0.0 && b.abs() > cv * s,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InferenceReport {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub refit_n_params: usize,
    pub targets: Vec<EffectRow>,
    pub joint_test: JointTestResult,
    pub union_support: Vec<String>,
    pub dropped_controls: Vec<String>,
    pub diagnostics: Vec<SelectionStep>,
}

impl InferenceReport {
    pub fn new(fit: &DoubleSelectionFit, frame: &ModelFrame, joint: &JointTestResult) -> Self {
        let names = |idx: &[usize]| idx.iter().map(|&j| frame.z_labels[j].to_string()).collect();
        Self {
            n: fit.n,
            p1: fit.p1(),
            p2: frame.p2(),
            refit_n_params: fit.refit_n_params,
            targets: marginal_effects_table(fit, joint),
            joint_test: joint.clone(),
            union_support: names(&fit.union_support),
            dropped_controls: names(&fit.dropped_controls),
            diagnostics: fit.diagnostics.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn frame(n: usize, p1: usize, p2: usize, seed: u64) -> ModelFrame {
        let mut rng = substream(seed, 0);
        let mut w = DMatrix::from_fn(n, p2, |_, _| rng.sample::<f64, _>(StandardNormal));
        w.column_mut(0).fill(1.0);
        let x = w.columns(0, p1).into_owned();
        let d: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<f64>() < 0.5))).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                0.5 * w[(i, 1)] - 0.3 * d[i] + 0.2 * d[i] * x[(i, 1)]
                    + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let lab = |j: usize| {
            if j == 0 {
                ColumnLabel::intercept()
            } else {
                ColumnLabel::variable(&format!("w{j}"))
            }
        };
        ModelFrame::new(
            y,
            d,
            x,
            w,
            (0..p1).map(lab).collect(),
            (0..p2).map(lab).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_lambda_is_full_ols() {
        let f = frame(120, 3, 8, 1);
        let cfg = DsConfig {
            penalty: PenaltyConfig::with_lambda(0.0),
            ..Default::default()
        };
        let fit = double_selection(&f, &cfg).unwrap();
        let t = f.targets();
        let mut cols: Vec<&[f64]> = (0..3).map(|j| linalg::column(&t, j)).collect();
        cols.extend((0..8).map(|j| linalg::column(&f.z, j)));
        let g = linalg::matrix_from_columns(120, &cols);
        let ols = linalg::least_squares(&g, &DVector::from_column_slice(&f.y));
        for j in 0..3 {
            assert!((fit.beta[j] - ols.coefficients[j]).abs() < 1e-6);
        }
        assert_eq!(fit.refit_n_params, 11);
    }

    #[test]
    fn union_is_set_union_of_logged_supports() {
        let f = frame(200, 3, 30, 2);
        let fit = double_selection(&f, &DsConfig::default()).unwrap();
        let mut u: BTreeSet<usize> = fit.outcome_support.iter().copied().collect();
        for s in &fit.per_target_supports {
            u.extend(s);
        }
        assert_eq!(fit.union_support, u.into_iter().collect::<Vec<_>>());
        assert!(fit.union_support.contains(&0));
    }

    #[test]
    fn omega_symmetric_psd_and_residuals_orthogonal() {
        let f = frame(200, 3, 30, 3);
        let fit = double_selection(&f, &DsConfig::default()).unwrap();
        let o = &fit.omega;
        assert!((o - o.transpose()).amax() < 1e-12);
        let eig = o.clone().symmetric_eigenvalues();
        assert!(eig.min() > -1e-10);
        let t = f.targets();
        for j in 0..3 {
            let r = linalg::dot(linalg::column(&t, j), &fit.residuals);
            assert!(r.abs() < 1e-8 * 200.0);
        }
        let s: f64 = fit.scores.column(0).sum();
        assert!(s.abs() < 1e-8);
    }

    #[test]
    fn collinear_target_is_hard_error() {
        let mut f = frame(80, 2, 5, 4);
        // make d·x_1 equal to a control column
        let t1: Vec<f64> = (0..80).map(|i| f.d[i] * f.x[(i, 1)]).collect();
        f.z.column_mut(4).copy_from_slice(&t1);
        let cfg = DsConfig {
            penalty: PenaltyConfig::with_lambda(0.0),
            ..Default::default()
        };
        match double_selection(&f, &cfg) {
            Err(Error::CollinearTarget(name)) => assert_eq!(name, "treatment x w1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_control_dropped_not_fatal() {
        let mut f = frame(80, 2, 6, 5);
        let c: Vec<f64> = f.z.column(2).iter().copied().collect();
        f.z.column_mut(5).copy_from_slice(&c);
        let cfg = DsConfig {
            penalty: PenaltyConfig::with_lambda(0.0),
            ..Default::default()
        };
        let fit = double_selection(&f, &cfg).unwrap();
        assert_eq!(fit.dropped_controls, vec![5]);
    }

    #[test]
    fn saturated_refit_rejected() {
        let f = frame(14, 3, 11, 6);
        let cfg = DsConfig {
            penalty: PenaltyConfig::with_lambda(0.0),
            ..Default::default()
        };
        let r = double_selection(&f, &cfg);
        assert!(matches!(r, Err(Error::Numerical(_))), "{:?}", r.map(|f| f.refit_n_params));
    }

    #[test]
    fn profile_basics() {
        let f = frame(200, 3, 10, 7);
        let fit = double_selection(&f, &DsConfig::default()).unwrap();
        let e1 = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let p = effect_profile(&fit, &e1, 2.5, 0.95);
        assert_eq!(p.effects[0], fit.beta[0]);
        let x = f.x_rows(&f.treated_rows());
        let p = effect_profile(&fit, &x, 0.5, 0.95);
        for i in 0..x.nrows() {
            assert!(p.band_halfwidth[i] >= p.pointwise_halfwidth[i]);
        }

        let mut zero = fit.clone();
        zero.omega.fill(0.0);
        let p = effect_profile(&zero, &x, 3.0, 0.95);
        assert!(p.band_halfwidth.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn zero_estimate_never_significant() {
        let f = frame(200, 3, 10, 8);
        let mut fit = double_selection(&f, &DsConfig::default()).unwrap();
        fit.beta[2] = 0.0;
        let joint = JointTestResult {
            statistic: 0.0,
            critical_value: 1.0,
            p_value: 1.0,
            cv_coefficients: 1.0,
            cv_profile: None,
            cv_profile_raw: None,
            replications: 100,
            level: 0.95,
            excluded_targets: vec![],
        };
        let rows = marginal_effects_table(&fit, &joint);
        assert!(!rows[2].significant);
        for r in &rows {
            assert!(r.sim_lower <= r.ci_lower && r.sim_upper >= r.ci_upper);
        }
    }
}
