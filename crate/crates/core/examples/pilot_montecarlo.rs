//! Pilot Monte Carlo runs for the null, heterogeneous and confounded
//! designs used by the acceptance suite.
//!
//!     cargo run --release --example pilot_montecarlo -- [null|band|confounded|all]
//!
//! Replication counts match the acceptance suite: 500 for the null design,
//! 200 for the others. The output is kept in docs/pilot_montecarlo.txt.

use std::time::Instant;

use hetgap::bootstrap::BootstrapConfig;
use hetgap::stats::ks_uniform;
use hetgap::synth::{monte_carlo, DgpSpec, MonteCarloSpec, MonteCarloTable, Noise, Treatment};
use hetgap::Execution;

fn base(beta: Vec<f64>, treatment: Treatment, delta: Vec<(usize, f64)>) -> DgpSpec {
    DgpSpec {
        n: 500,
        p1: beta.len(),
        p2: 200,
        alpha: 1.0,
        beta,
        delta,
        noise: Noise::Homoscedastic { sigma: 1.0 },
        rho: 0.5,
        treatment,
        seed: 0,
    }
}

fn run(name: &str, dgp: DgpSpec, reps: usize, seed: u64, compare_single: bool, profile: bool) -> MonteCarloTable {
    let spec = MonteCarloSpec {
        dgp,
        replications: reps,
        seed,
        ds: Default::default(),
        bootstrap: BootstrapConfig {
            replications: 500,
            ..Default::default()
        },
        compare_single,
        profile,
        execution: Execution::Parallel,
    };
    let t0 = Instant::now();
    let t = monte_carlo(&spec).expect("monte carlo");
    println!("== {name}: {reps} reps in {:.1?}, {} failures", t0.elapsed(), t.failures);
    println!(
        "joint rejection {:.4} (se {:.4}), KS p = {:.4}",
        t.joint_rejection,
        t.joint_rejection_se,
        ks_uniform(&t.p_values).p_value
    );
    if let Some(c) = t.profile_coverage {
        println!("profile band coverage {c:.4} (se {:.4})", t.profile_coverage_se.unwrap());
    }
    for r in &t.targets {
        println!(
            "  {:>11}  true {:>6.3}  mean {:>7.4}  coverage {:.3}  single {}",
            r.label,
            r.beta_true,
            r.mean_estimate,
            r.coverage,
            r.single_coverage.map_or("-".into(), |c| format!("{c:.3}"))
        );
    }
    t
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map_or("all", String::as_str);
    let controls = vec![(1, 1.0), (2, -0.5), (11, 0.5), (12, 0.25)];
    let random = Treatment::Random { prob: 0.5 };

    if matches!(which, "null" | "all") {
        run("null", base(vec![0.0; 10], random.clone(), controls.clone()), 500, 4, true, false);
    }
    if matches!(which, "band" | "all") {
        let mut beta = vec![0.0; 10];
        beta[0] = -0.3;
        beta[1] = 0.2;
        run("band", base(beta, random.clone(), controls.clone()), 200, 5, false, true);
    }
    if matches!(which, "confounded" | "all") {
        for delta in [0.2, 0.3, 0.5] {
            let mut ctl = controls.clone();
            ctl.push((20, delta));
            let probit = Treatment::Probit {
                intercept: 0.0,
                weights: vec![(20, 2.0)],
            };
            run(
                &format!("confounded delta_20 = {delta}"),
                base(vec![-0.2, 0.1, 0.0, 0.0, 0.0], probit, ctl),
                200,
                6,
                true,
                false,
            );
        }
    }
}
