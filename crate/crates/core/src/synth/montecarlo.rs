use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{generate, DgpSpec};
use crate::bootstrap::{joint_inference, BootstrapConfig};
use crate::dsinfer::{double_selection, DsConfig, Selection};
use crate::error::Result;
use crate::par::Execution;
use crate::rng::derive_seed;
use crate::stats::{binomial_se, two_sided_z};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub dgp: DgpSpec,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub ds: DsConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    /// Also fit the single-selection estimator on every replication.
    #[serde(default)]
    pub compare_single: bool,
    /// Bootstrap a simultaneous band over the treated rows.
    #[serde(default)]
    pub profile: bool,
    #[serde(skip)]
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub label: String,
    pub beta_true: f64,
    pub mean_estimate: f64,
    /// Share of replications whose pointwise interval covers β_j.
    pub coverage: f64,
    pub coverage_se: f64,
    /// Share of replications with |β̂_j| / SE_j above the pointwise
    /// critical value.
    pub rejection: f64,
    pub single_coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloTable {
    pub replications: usize,
    /// Replications whose fit failed; excluded from every rate.
    pub failures: usize,
    pub targets: Vec<TargetSummary>,
    /// Share of replications where the sup-t exceeds its bootstrap
    /// critical value.
    pub joint_rejection: f64,
    pub joint_rejection_se: f64,
    pub profile_coverage: Option<f64>,
    pub profile_coverage_se: Option<f64>,
    pub p_values: Vec<f64>,
    /// (β̂_j − β_j)/SE_j per target, across completed replications.
    pub standardized: Vec<Vec<f64>>,
}

struct Rep {
    beta: Vec<f64>,
    covered: Vec<bool>,
    rejected: Vec<bool>,
    standardized: Vec<f64>,
    joint_reject: bool,
    p_value: f64,
    profile_covered: Option<bool>,
    single_covered: Option<Vec<bool>>,
}

fn one_rep(spec: &MonteCarloSpec, r: usize) -> Result<Rep> {
    let rep_seed = derive_seed(spec.seed, r as u64);
    let mut dgp = spec.dgp.clone();
    dgp.seed = rep_seed;
    let (frame, truth) = generate(&dgp)?;
    let ds = DsConfig {
        execution: Execution::Sequential,
        selection: Selection::Double,
        ..spec.ds.clone()
    };
    let fit = double_selection(&frame, &ds)?;
    let z = two_sided_z(spec.bootstrap.level);
    let p1 = fit.p1();
    let covered = (0..p1).map(|j| (fit.beta[j] - truth.beta[j]).abs() <= z * fit.se[j]).collect();
    let rejected = (0..p1).map(|j| fit.beta[j].abs() > z * fit.se[j]).collect();
    let standardized = (0..p1).map(|j| (fit.beta[j] - truth.beta[j]) / fit.se[j]).collect();

    let boot = BootstrapConfig {
        seed: derive_seed(rep_seed, 1),
        execution: Execution::Sequential,
        ..spec.bootstrap.clone()
    };
    let treated = frame.treated_rows();
    let xw = frame.x_rows(&treated);
    let joint = joint_inference(&fit.scores, &fit.beta, spec.profile.then_some(&xw), &boot)?;
    let profile_covered = joint.cv_profile.map(|cv| {
        let est = &xw * DVector::from_column_slice(&fit.beta);
        (0..treated.len()).all(|k| {
            let xi = xw.row(k).transpose();
            let se = (xi.transpose() * &fit.omega * &xi)[(0, 0)].max(0.0).sqrt();
            (est[k] - truth.effects[treated[k]]).abs() <= cv * se
        })
    });

    let single_covered = if spec.compare_single {
        let single = DsConfig {
            selection: Selection::Single,
            ..ds.clone()
        };
        let sf = double_selection(&frame, &single)?;
        Some((0..p1).map(|j| (sf.beta[j] - truth.beta[j]).abs() <= z * sf.se[j]).collect())
    } else {
        None
    };

    Ok(Rep {
        beta: fit.beta,
        covered,
        rejected,
        standardized,
        joint_reject: joint.statistic > joint.critical_value,
        p_value: joint.p_value,
        profile_covered,
        single_covered,
    })
}

fn share(flags: impl Iterator<Item = bool>) -> (f64, usize) {
    let (mut hit, mut m) = (0usize, 0usize);
    for f in flags {
        hit += usize::from(f);
        m += 1;
    }
    (if m == 0 { f64::NAN } else { hit as f64 / m as f64 }, m)
}

/// Runs `replications` independent fits. Replication r draws its data from
/// derive_seed(seed, r) and its multipliers from a seed derived from that,
/// so the table does not depend on the execution strategy.
pub fn monte_carlo(spec: &MonteCarloSpec) -> Result<MonteCarloTable> {
    spec.dgp.validate()?;
    spec.bootstrap.validate()?;
    let results: Vec<Result<Rep>> = spec.execution.map_range(spec.replications, |r| one_rep(spec, r));
    let mut reps = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => reps.push(rep),
            Err(e) => {
                warn!("replication {r} failed: {e}");
                failures += 1;
            }
        }
    }
    let p1 = spec.dgp.p1;
    let m = reps.len();
    let targets = (0..p1)
        .map(|j| {
            let (coverage, _) = share(reps.iter().map(|r| r.covered[j]));
            let (rejection, _) = share(reps.iter().map(|r| r.rejected[j]));
            let single_coverage = spec
                .compare_single
                .then(|| share(reps.iter().map(|r| r.single_covered.as_ref().unwrap()[j])).0);
            TargetSummary {
                label: super::label(j).to_string(),
                beta_true: spec.dgp.beta[j],
                mean_estimate: reps.iter().map(|r| r.beta[j]).sum::<f64>() / m as f64,
                coverage,
                coverage_se: binomial_se(coverage, m),
                rejection,
                single_coverage,
            }
        })
        .collect();
    let (joint_rejection, _) = share(reps.iter().map(|r| r.joint_reject));
    let profile = spec
        .profile
        .then(|| share(reps.iter().map(|r| r.profile_covered.unwrap_or(false))).0);
    Ok(MonteCarloTable {
        replications: spec.replications,
        failures,
        targets,
        joint_rejection,
        joint_rejection_se: binomial_se(joint_rejection, m),
        profile_coverage: profile,
        profile_coverage_se: profile.map(|p| binomial_se(p, m)),
        p_values: reps.iter().map(|r| r.p_value).collect(),
        standardized: (0..p1).map(|j| reps.iter().map(|r| r.standardized[j]).collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Noise, Treatment};
    use super::*;

    fn spec(sigma: f64) -> MonteCarloSpec {
        MonteCarloSpec {
            dgp: DgpSpec {
                n: 120,
                p1: 2,
                p2: 12,
                alpha: 0.3,
                beta: vec![-0.2, 0.1],
                delta: vec![(3, 0.5)],
                noise: Noise::Homoscedastic { sigma },
                rho: 0.3,
                treatment: Treatment::Random { prob: 0.5 },
                seed: 0,
            },
            replications: 6,
            seed: 9,
            ds: DsConfig::default(),
            bootstrap: BootstrapConfig {
                replications: 100,
                ..Default::default()
            },
            compare_single: true,
            profile: true,
            execution: Execution::Sequential,
        }
    }

    #[test]
    fn strategies_give_identical_tables() {
        let mut s = spec(1.0);
        let a = monte_carlo(&s).unwrap();
        s.execution = Execution::Parallel;
        let b = monte_carlo(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.failures, 0);
        assert_eq!(a.p_values.len(), 6);
    }

    #[test]
    fn tiny_noise_recovers_truth() {
        let t = monte_carlo(&spec(1e-9)).unwrap();
        for row in &t.targets {
            assert!((row.mean_estimate - row.beta_true).abs() < 1e-6);
        }
    }
}
