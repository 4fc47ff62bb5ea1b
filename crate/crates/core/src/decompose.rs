//! Two-fold Oaxaca-Blinder decomposition of the mean log-wage gap, with
//! conditional wage ratios and the link between the mean of the estimated
//! individual effects and the unexplained gap.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataprep::{ColumnLabel, ModelFrame};
use crate::dsinfer::DoubleSelectionFit;
use crate::error::{Error, Result};
use crate::linalg::{self, IndependenceBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSet {
    /// Intercept only: the raw gap.
    Unconditional,
    /// Intercept plus the human-capital variables.
    HumanCapital,
    /// Every moderator column.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Male coefficients value the characteristics.
    #[default]
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    pub sets: Vec<CovariateSet>,
    /// Source variables of the human-capital set.
    pub human_capital: Vec<String>,
    pub reference: Reference,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            sets: vec![
                CovariateSet::Unconditional,
                CovariateSet::HumanCapital,
                CovariateSet::Full,
            ],
            human_capital: vec!["educ".into(), "exper".into(), "exper_sq".into()],
            reference: Reference::Male,
        }
    }
}

/// Separate OLS fits for men (d = 0) and women (d = 1).
#[derive(Debug, Clone, Serialize)]
pub struct GroupRegression {
    pub columns: Vec<ColumnLabel>,
    pub gamma_m: Vec<f64>,
    pub gamma_f: Vec<f64>,
    pub xbar_m: Vec<f64>,
    pub xbar_f: Vec<f64>,
    pub ybar_m: f64,
    pub ybar_f: f64,
    pub n_m: usize,
    pub n_f: usize,
    /// Columns dropped as collinear within either group.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionResult {
    pub set: CovariateSet,
    pub reference: Reference,
    /// ȳ_m − ȳ_f.
    pub total_gap: f64,
    pub explained: f64,
    pub unexplained: f64,
    /// exp(ȳ_f − ȳ_m).
    pub ratio_unconditional: f64,
    /// exp(x̄_f'γ_f) / exp(x̄_f'γ_m).
    pub ratio_conditional: f64,
    pub n_m: usize,
    pub n_f: usize,
    pub columns: Vec<String>,
}

fn covariate_columns(frame: &ModelFrame, set: CovariateSet, hc: &[String]) -> Vec<usize> {
    (0..frame.p1())
        .filter(|&j| {
            let l = &frame.x_labels[j];
            l.is_intercept()
                || match set {
                    CovariateSet::Unconditional => false,
                    CovariateSet::HumanCapital => {
                        l.variables().iter().all(|v| hc.iter().any(|h| h == v))
                    }
                    CovariateSet::Full => true,
                }
        })
        .collect()
}

fn group_rows(frame: &ModelFrame, female: bool) -> Vec<usize> {
    let v = if female { 1.0 } else { 0.0 };
    (0..frame.n()).filter(|&i| frame.d[i] == v).collect()
}

pub fn group_regression(frame: &ModelFrame, columns: &[usize]) -> Result<GroupRegression> {
    let rows_m = group_rows(frame, false);
    let rows_f = group_rows(frame, true);
    if rows_m.is_empty() || rows_f.is_empty() {
        return Err(Error::Data("both groups must be nonempty".into()));
    }
    let pick = |rows: &[usize], j: usize| -> Vec<f64> { rows.iter().map(|&i| frame.x[(i, j)]).collect() };

    let mut basis_m = IndependenceBasis::new(rows_m.len());
    let mut basis_f = IndependenceBasis::new(rows_f.len());
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &j in columns {
        let (cm, cf) = (pick(&rows_m, j), pick(&rows_f, j));
        let (mut bm, mut bf) = (basis_m.clone(), basis_f.clone());
        if bm.try_add(&cm) && bf.try_add(&cf) {
            basis_m = bm;
            basis_f = bf;
            kept.push(j);
        } else {
            dropped.push(frame.x_labels[j].to_string());
        }
    }
    if !dropped.is_empty() {
        warn!("group regressions: dropped collinear columns {}", dropped.join(", "));
    }

    let fit = |rows: &[usize]| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        if rows.len() < kept.len() {
            return Err(Error::Data(format!(
                "group of {} rows cannot identify {} coefficients",
                rows.len(),
                kept.len()
            )));
        }
        let x = DMatrix::from_fn(rows.len(), kept.len(), |r, c| frame.x[(rows[r], kept[c])]);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| frame.y[i]));
        let ls = linalg::least_squares(&x, &y);
        linalg::warn_min_norm("group regression", &ls, kept.len());
        let xbar = (0..kept.len()).map(|c| x.column(c).mean()).collect();
        Ok((ls.coefficients.iter().copied().collect(), xbar, y.mean()))
    };
    let (gamma_m, xbar_m, ybar_m) = fit(&rows_m)?;
    let (gamma_f, xbar_f, ybar_f) = fit(&rows_f)?;
    Ok(GroupRegression {
        columns: kept.iter().map(|&j| frame.x_labels[j].clone()).collect(),
        gamma_m,
        gamma_f,
        xbar_m,
        xbar_f,
        ybar_m,
        ybar_f,
        n_m: rows_m.len(),
        n_f: rows_f.len(),
        dropped,
    })
}

impl GroupRegression {
    pub fn decompose(&self, set: CovariateSet, reference: Reference) -> DecompositionResult {
        let dot = linalg::dot;
        let diff_x: Vec<f64> = self.xbar_m.iter().zip(&self.xbar_f).map(|(m, f)| m - f).collect();
        let diff_g: Vec<f64> = self.gamma_m.iter().zip(&self.gamma_f).map(|(m, f)| m - f).collect();
        let (explained, unexplained) = match reference {
            Reference::Male => (dot(&diff_x, &self.gamma_m), dot(&self.xbar_f, &diff_g)),
            Reference::Female => (dot(&diff_x, &self.gamma_f), dot(&self.xbar_m, &diff_g)),
        };
        DecompositionResult {
            set,
            reference,
            total_gap: self.ybar_m - self.ybar_f,
            explained,
            unexplained,
            ratio_unconditional: (self.ybar_f - self.ybar_m).exp(),
            ratio_conditional: self.wage_ratio(),
            n_m: self.n_m,
            n_f: self.n_f,
            columns: self.columns.iter().map(|c| c.to_string()).collect(),
        }
    }

    /// exp(x̄_f'γ_f) / exp(x̄_f'γ_m).
    pub fn wage_ratio(&self) -> f64 {
        let diff: Vec<f64> = self.gamma_f.iter().zip(&self.gamma_m).map(|(f, m)| f - m).collect();
        linalg::dot(&self.xbar_f, &diff).exp()
    }
}

pub fn oaxaca_blinder(frame: &ModelFrame, set: CovariateSet, cfg: &DecomposeConfig) -> Result<DecompositionResult> {
    let cols = covariate_columns(frame, set, &cfg.human_capital);
    Ok(group_regression(frame, &cols)?.decompose(set, cfg.reference))
}

pub fn wage_ratio(frame: &ModelFrame, set: CovariateSet, cfg: &DecomposeConfig) -> Result<f64> {
    let cols = covariate_columns(frame, set, &cfg.human_capital);
    Ok(group_regression(frame, &cols)?.wage_ratio())
}

/// Mean estimated effect against the unexplained gap.
#[derive(Debug, Clone, Serialize)]
pub struct Reconciliation {
    /// Mean of x_i'β̂ over all rows.
    pub mean_effect_all: f64,
    /// Mean of x_i'β̂ over the treated rows.
    pub mean_effect_female: f64,
    /// −x̄_f'(γ_m − γ_f).
    pub minus_unexplained: f64,
    pub diff_all: f64,
    pub diff_female: f64,
}

/// Compares the average of the fitted individual effects with the
/// negative unexplained gap from the full-set group regressions. With
/// λ = 0 and Z spanning the same space as X the female mean matches
/// exactly; after selection the difference is a diagnostic.
pub fn reconcile_mean_effect(fit: &DoubleSelectionFit, frame: &ModelFrame) -> Result<Reconciliation> {
    let cols: Vec<usize> = (0..frame.p1()).collect();
    let groups = group_regression(frame, &cols)?;
    if groups.columns != fit.target_labels {
        return Err(Error::Config(format!(
            "covariate sets differ: fit has [{}], group regressions have [{}]",
            join(&fit.target_labels),
            join(&groups.columns)
        )));
    }
    let beta = DVector::from_column_slice(&fit.beta);
    let effects = &frame.x * &beta;
    let treated = frame.treated_rows();
    let mean_effect_all = effects.mean();
    let mean_effect_female = treated.iter().map(|&i| effects[i]).sum::<f64>() / treated.len() as f64;
    let unexplained = groups.decompose(CovariateSet::Full, Reference::Male).unexplained;
    Ok(Reconciliation {
        mean_effect_all,
        mean_effect_female,
        minus_unexplained: -unexplained,
        diff_all: mean_effect_all + unexplained,
        diff_female: mean_effect_female + unexplained,
    })
}

fn join(labels: &[ColumnLabel]) -> String {
    labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn frame(n: usize, shift: f64, gap: f64, seed: u64) -> ModelFrame {
        let mut rng = substream(seed, 0);
        let d: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            _ => rng.sample::<f64, _>(StandardNormal) + shift * d[i],
        });
        let y = (0..n)
            .map(|i| 1.0 + 0.3 * x[(i, 1)] - 0.2 * x[(i, 2)] - gap * d[i] + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let labels = vec![
            ColumnLabel::intercept(),
            ColumnLabel::variable("educ"),
            ColumnLabel::variable("tenure"),
        ];
        ModelFrame::new(y, d, x.clone(), x, labels.clone(), labels).unwrap()
    }

    #[test]
    fn identity_holds_for_every_set_and_reference() {
        let f = frame(300, 0.4, 0.15, 1);
        for set in [CovariateSet::Unconditional, CovariateSet::HumanCapital, CovariateSet::Full] {
            for reference in [Reference::Male, Reference::Female] {
                let cfg = DecomposeConfig { reference, ..Default::default() };
                let r = oaxaca_blinder(&f, set, &cfg).unwrap();
                assert!((r.explained + r.unexplained - r.total_gap).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn human_capital_set_picks_named_variables() {
        let f = frame(100, 0.0, 0.0, 2);
        let r = oaxaca_blinder(&f, CovariateSet::HumanCapital, &DecomposeConfig::default()).unwrap();
        assert_eq!(r.columns, vec!["(Intercept)", "educ"]);
        let r = oaxaca_blinder(&f, CovariateSet::Unconditional, &DecomposeConfig::default()).unwrap();
        assert_eq!(r.columns, vec!["(Intercept)"]);
        assert!(r.explained.abs() < 1e-12);
    }

    #[test]
    fn intercept_gap_gives_exp_ratio() {
        // noise-free, γ_m − γ_f = g·e_intercept
        let mut f = frame(200, 0.5, 0.25, 3);
        for i in 0..200 {
            f.y[i] = 1.0 + 0.3 * f.x[(i, 1)] - 0.2 * f.x[(i, 2)] - 0.25 * f.d[i];
        }
        let ratio = wage_ratio(&f, CovariateSet::Full, &DecomposeConfig::default()).unwrap();
        assert!((ratio - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn identical_valuation_gives_unit_ratio() {
        let mut f = frame(200, 0.5, 0.0, 4);
        for i in 0..200 {
            f.y[i] = 1.0 + 0.3 * f.x[(i, 1)] - 0.2 * f.x[(i, 2)];
        }
        let r = oaxaca_blinder(&f, CovariateSet::Full, &DecomposeConfig::default()).unwrap();
        assert!((r.ratio_conditional - 1.0).abs() < 1e-12);
        assert!(r.unexplained.abs() < 1e-12);
        assert!(r.explained.abs() > 0.05);
    }

    #[test]
    fn empty_group_rejected() {
        let mut f = frame(10, 0.0, 0.0, 5);
        f.d = vec![0.0; 10];
        assert!(matches!(
            oaxaca_blinder(&f, CovariateSet::Full, &DecomposeConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn collinear_group_column_dropped() {
        let mut f = frame(60, 0.0, 0.1, 6);
        // tenure is constant among women
        for i in 0..60 {
            if f.d[i] == 1.0 {
                f.x[(i, 2)] = 2.0;
            }
        }
        let r = oaxaca_blinder(&f, CovariateSet::Full, &DecomposeConfig::default()).unwrap();
        assert_eq!(r.columns, vec!["(Intercept)", "educ"]);
        assert!((r.explained + r.unexplained - r.total_gap).abs() < 1e-10);
    }
}
