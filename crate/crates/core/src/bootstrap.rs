//! Gaussian multiplier bootstrap for sup-t statistics.
//!
//! Given influence rows ψ_i for the target coefficients, each replication
//! draws multipliers ξ_i and evaluates the studentized maximum of
//! (1/√n) Σ_i ξ_i ψ_i over targets and, optionally, over individual effect
//! profiles x_i'β. Replication `b` draws from its own substream of the
//! configured seed, so results do not depend on scheduling.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::par::Execution;
use crate::rng::substream;
use crate::stats::{order_statistic, two_sided_z};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    #[default]
    Normal,
    /// Two-point law with mean 0, variance 1 and third moment 1.
    Mammen,
}

impl Multiplier {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            Multiplier::Normal => rng.sample(StandardNormal),
            Multiplier::Mammen => {
                let s5 = 5f64.sqrt();
                if rng.random::<f64>() < (s5 + 1.0) / (2.0 * s5) {
                    -(s5 - 1.0) / 2.0
                } else {
                    (s5 + 1.0) / 2.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
    pub multiplier: Multiplier,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 20160101,
            level: 0.95,
            multiplier: Multiplier::Normal,
            execution: Execution::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "bootstrap level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("bootstrap needs at least one replication".into()));
        }
        if self.replications < 100 {
            warn!(
                "{} bootstrap replications is too few for reported inference",
                self.replications
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTestResult {
    /// Observed max_j √n |β̂_j| / σ̂_j.
    pub statistic: f64,
    /// Level quantile of the bootstrap sup-t over targets.
    pub critical_value: f64,
    pub p_value: f64,
    /// `critical_value`, floored at the pointwise normal critical value so
    /// simultaneous intervals always contain pointwise ones.
    pub cv_coefficients: f64,
    /// Floored level quantile of the sup over profile rows, when requested.
    pub cv_profile: Option<f64>,
    pub cv_profile_raw: Option<f64>,
    pub replications: usize,
    pub level: f64,
    /// Targets left out of the maximum because σ̂_j = 0.
    pub excluded_targets: Vec<usize>,
}

/// Influence rows for the target block of an OLS fit on `g`:
/// ψ_i = [M⁻¹ g_i ê_i]_T · sqrt(n/(n−k)), M = G'G/n.
///
/// With the HC1 factor folded in, (1/n) Σ ψ_i ψ_i' is the HC1 sandwich
/// target block and Σ ψ_i = 0 whenever ê is orthogonal to G.
pub fn score_matrix(g: &DMatrix<f64>, residuals: &[f64], targets: &[usize]) -> Result<DMatrix<f64>> {
    let (n, k) = g.shape();
    if residuals.len() != n {
        return Err(Error::Numerical(format!(
            "score matrix: {} residuals for {n} rows",
            residuals.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::Numerical(format!("score matrix: target {t} out of {k} columns")));
    }
    if n <= k {
        return Err(Error::Numerical(format!(
            "refit is saturated (n = {n}, k = {k}): HC1 correction undefined"
        )));
    }
    let nf = n as f64;
    let m = g.tr_mul(g) / nf;
    let m_inv = linalg::spd_inverse(&m, "refit Gram matrix")?;
    let bread = DMatrix::from_fn(targets.len(), k, |r, c| m_inv[(targets[r], c)]);
    let mut psi = g * bread.transpose();
    let hc1 = (nf / (nf - k as f64)).sqrt();
    for (i, mut row) in psi.row_iter_mut().enumerate() {
        row *= residuals[i] * hc1;
    }
    Ok(psi)
}

/// (1/n) Ψ'Ψ, symmetrized.
pub fn score_covariance(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let n = scores.nrows() as f64;
    let s = scores.tr_mul(scores) / n;
    (&s + s.transpose()) * 0.5
}

/// Joint sup-t test over targets. Equivalent to [`joint_inference`]
/// without profile rows.
pub fn multiplier_bootstrap(
    scores: &DMatrix<f64>,
    beta: &[f64],
    cfg: &BootstrapConfig,
) -> Result<JointTestResult> {
    joint_inference(scores, beta, None, cfg)
}

/// Critical value for simultaneous bands over the rows of `x`.
pub fn simultaneous_profile_cv(
    scores: &DMatrix<f64>,
    x: &DMatrix<f64>,
    cfg: &BootstrapConfig,
) -> Result<f64> {
    let beta = vec![0.0; scores.ncols()];
    let r = joint_inference(scores, &beta, Some(x), cfg)?;
    Ok(r.cv_profile.expect("profile requested"))
}

struct Profile {
    rows: DMatrix<f64>,
    sd: Vec<f64>,
}

fn profile_rows(x: &DMatrix<f64>, omega: &DMatrix<f64>) -> Profile {
    let mut keep = Vec::new();
    let mut sd = Vec::new();
    let mut zero = 0;
    for i in 0..x.nrows() {
        let xi = x.row(i).transpose();
        let v = (xi.transpose() * omega * &xi)[(0, 0)];
        if v > 0.0 {
            keep.push(i);
            sd.push(v.sqrt());
        } else {
            zero += 1;
        }
    }
    if zero > 0 {
        warn!("{zero} profile rows with zero variance excluded from the band maximum");
    }
    Profile {
        rows: DMatrix::from_fn(keep.len(), x.ncols(), |r, c| x[(keep[r], c)]),
        sd,
    }
}

/// One pass of B replications sharing multipliers between the coefficient
/// and profile maxima.
pub fn joint_inference(
    scores: &DMatrix<f64>,
    beta: &[f64],
    profile_x: Option<&DMatrix<f64>>,
    cfg: &BootstrapConfig,
) -> Result<JointTestResult> {
    cfg.validate()?;
    let (n, p1) = scores.shape();
    if beta.len() != p1 {
        return Err(Error::Numerical(format!(
            "{} coefficients for {p1} score columns",
            beta.len()
        )));
    }
    if let Some(x) = profile_x {
        if x.ncols() != p1 {
            return Err(Error::Numerical(format!(
                "profile rows have {} columns, scores have {p1}",
                x.ncols()
            )));
        }
    }
    let omega = score_covariance(scores);
    let sigma: Vec<f64> = (0..p1).map(|j| omega[(j, j)].max(0.0).sqrt()).collect();
    let active: Vec<usize> = (0..p1).filter(|&j| sigma[j] > 0.0).collect();
    let excluded: Vec<usize> = (0..p1).filter(|&j| sigma[j] <= 0.0).collect();
    if !excluded.is_empty() {
        warn!("targets {excluded:?} have zero standard error and are left out of the sup-t");
    }
    let root_n = (n as f64).sqrt();
    let statistic = active
        .iter()
        .map(|&j| root_n * beta[j].abs() / sigma[j])
        .fold(0.0, f64::max);
    let profile = profile_x.map(|x| profile_rows(x, &omega));

    let draws: Vec<(f64, f64)> = cfg.execution.map_range(cfg.replications, |b| {
        let mut rng = substream(cfg.seed, b as u64);
        let mut v = DVector::zeros(p1);
        for i in 0..n {
            let xi = cfg.multiplier.draw(&mut rng);
            for j in 0..p1 {
                v[j] += xi * scores[(i, j)];
            }
        }
        v /= root_n;
        let t_coef = active.iter().map(|&j| v[j].abs() / sigma[j]).fold(0.0, f64::max);
        let t_prof = match &profile {
            Some(p) => {
                let proj = &p.rows * &v;
                proj.iter()
                    .zip(&p.sd)
                    .map(|(a, s)| a.abs() / s)
                    .fold(0.0, f64::max)
            }
            None => 0.0,
        };
        (t_coef, t_prof)
    });

    let mut t_coef: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let exceed = t_coef.iter().filter(|&&t| t >= statistic).count();
    t_coef.sort_by(f64::total_cmp);
    let critical_value = order_statistic(&t_coef, cfg.level);
    let z = two_sided_z(cfg.level);
    let cv_profile_raw = profile.as_ref().map(|_| {
        let mut t: Vec<f64> = draws.iter().map(|d| d.1).collect();
        t.sort_by(f64::total_cmp);
        order_statistic(&t, cfg.level)
    });
    Ok(JointTestResult {
        statistic,
        critical_value,
        p_value: exceed as f64 / cfg.replications as f64,
        cv_coefficients: critical_value.max(z),
        cv_profile: cv_profile_raw.map(|c| c.max(z)),
        cv_profile_raw,
        replications: cfg.replications,
        level: cfg.level,
        excluded_targets: excluded,
    })
}
