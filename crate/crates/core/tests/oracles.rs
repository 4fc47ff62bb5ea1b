//! Checks against values computed independently of the estimators: a
//! proximal-gradient minimizer, closed-form loadings under a known
//! heteroscedastic law, direct least squares, and the two readings of the
//! mean-effect reconciliation.

use hetgap::decompose::{oaxaca_blinder, reconcile_mean_effect, CovariateSet, DecomposeConfig, Reference};
use hetgap::dsinfer::{double_selection, DsConfig};
use hetgap::lasso::{self, fit_lasso, LassoProblem, PenaltyConfig, PenaltyLoadings, SolverOptions};
use hetgap::rng::substream;
use hetgap::synth::{generate, prox_oracle, DgpSpec, Noise, Treatment};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn normal_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = substream(seed, 0);
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn coordinate_descent_matches_proximal_gradient() {
    for seed in 0..8 {
        let w = normal_matrix(12, 6, seed);
        let y: Vec<f64> = (0..12).map(|i| 2.0 * w[(i, 0)] - w[(i, 4)] + 0.3 * w[(i, 2)].sin()).collect();
        let prob = LassoProblem::from_matrix(y, &w, vec![true; 6]).unwrap();
        for lambda in [0.5, 3.0, 10.0] {
            let loads = PenaltyLoadings::fixed(vec![1.0, 0.8, 1.2, 1.0, 0.9, 1.1], lambda);
            let cd = fit_lasso(&prob, &loads, &SolverOptions::default()).unwrap();
            let pg = prox_oracle(&prob, &loads, 200_000, None);
            let a = lasso::objective(&prob, &cd.coefficients, &loads);
            let b = lasso::objective(&prob, &pg, &loads);
            assert!(a <= b + 1e-9, "seed {seed}, lambda {lambda}: {a} vs {b}");
            assert!((a - b).abs() < 1e-7);
            assert!(cd.report.kkt_violation < 1e-6);
        }
    }
}

#[test]
fn objective_nondecreasing_in_lambda() {
    let w = normal_matrix(40, 8, 3);
    let y: Vec<f64> = (0..40).map(|i| w[(i, 1)] - 0.5 * w[(i, 6)]).collect();
    let prob = LassoProblem::from_matrix(y, &w, vec![true; 8]).unwrap();
    let mut last = 0.0;
    for lambda in [0.0, 1.0, 5.0, 20.0, 80.0] {
        let fit = fit_lasso(&prob, &PenaltyLoadings::fixed(vec![1.0; 8], lambda), &SolverOptions::default()).unwrap();
        assert!(fit.objective >= last - 1e-12);
        last = fit.objective;
    }
}

#[test]
fn refit_residuals_orthogonal_to_support() {
    let w = normal_matrix(60, 10, 5);
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; 60]];
    cols.extend((0..10).map(|j| w.column(j).iter().copied().collect()));
    let y: Vec<f64> = (0..60).map(|i| 1.0 + 1.5 * w[(i, 2)] - w[(i, 7)] + 0.2 * w[(i, 0)] * w[(i, 1)]).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let mut pen = vec![true; 11];
    pen[0] = false;
    let prob = LassoProblem::new(y, refs, pen).unwrap();
    let (fit, _) = lasso::estimate(&prob, &PenaltyConfig::default()).unwrap();
    let post = lasso::post_lasso_refit(&prob, &fit);
    let b = post.post.as_ref().unwrap();
    let r = prob.residuals(b);
    for &j in &fit.support {
        let g: f64 = prob.column(j).iter().zip(&r).map(|(x, e)| x * e).sum();
        assert!(g.abs() < 1e-8, "column {j}: {g}");
    }
}

#[test]
fn heteroscedastic_loadings_near_population_values() {
    // y = 0.5 x + ε, ε = x·e: E[x²ε²] = E[x⁴] = 3, E[v²ε²] = 1 for v ⊥ x
    let n = 10_000;
    let w = normal_matrix(n, 4, 21);
    let mut rng = substream(21, 1);
    let y: Vec<f64> = (0..n)
        .map(|i| 0.5 * w[(i, 0)] + w[(i, 0)] * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut owned: Vec<Vec<f64>> = vec![vec![1.0; n]];
    owned.extend((0..4).map(|j| w.column(j).iter().copied().collect()));
    let cols: Vec<&[f64]> = owned.iter().map(|c| c.as_slice()).collect();
    let prob = LassoProblem::new(y, cols, vec![false, true, true, true, true]).unwrap();
    let (_, loads) = lasso::estimate(&prob, &PenaltyConfig::default()).unwrap();
    let expected = [3f64.sqrt(), 1.0, 1.0, 1.0];
    for (j, e) in expected.iter().enumerate() {
        let rel = (loads.psi[j + 1] - e).abs() / e;
        assert!(rel < 0.10, "column {}: {} vs {e}", j + 1, loads.psi[j + 1]);
    }
}

fn saturated_frame(seed: u64) -> hetgap::dataprep::ModelFrame {
    generate(&DgpSpec {
        n: 300,
        p1: 6,
        p2: 6,
        alpha: 0.8,
        beta: vec![-0.3, 0.1, 0.05, 0.0, -0.2, 0.0],
        delta: vec![(1, 0.4), (3, -0.3)],
        noise: Noise::Homoscedastic { sigma: 0.5 },
        rho: 0.4,
        treatment: Treatment::Probit {
            intercept: -0.1,
            weights: vec![(2, 0.6)],
        },
        seed,
    })
    .unwrap()
    .0
}

#[test]
fn zero_penalty_equals_direct_least_squares() {
    let frame = saturated_frame(1);
    let cfg = DsConfig {
        penalty: PenaltyConfig::with_lambda(0.0),
        ..Default::default()
    };
    let fit = double_selection(&frame, &cfg).unwrap();
    // normal equations on [T, Z]
    let t = frame.targets();
    let mut g = DMatrix::zeros(frame.n(), frame.p1() + frame.p2());
    g.columns_mut(0, frame.p1()).copy_from(&t);
    g.columns_mut(frame.p1(), frame.p2()).copy_from(&frame.z);
    let b = (g.transpose() * &g)
        .cholesky()
        .unwrap()
        .solve(&(g.transpose() * DVector::from_column_slice(&frame.y)));
    for j in 0..frame.p1() {
        assert!((fit.beta[j] - b[j]).abs() < 1e-9);
    }
}

#[test]
fn reconciliation_holds_for_the_female_mean() {
    // With X = Z and λ = 0, β̂ = γ_f − γ_m, so the female mean of x_i'β̂ is
    // x̄_f'(γ_f − γ_m) = −unexplained. The all-sample mean uses x̄ instead
    // of x̄_f and does not match.
    for seed in 0..4 {
        let frame = saturated_frame(seed);
        let fit = double_selection(
            &frame,
            &DsConfig {
                penalty: PenaltyConfig::with_lambda(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        let rec = reconcile_mean_effect(&fit, &frame).unwrap();
        assert!(rec.diff_female.abs() < 1e-8, "{rec:?}");
        assert!(rec.diff_all.abs() > 1e-4, "{rec:?}");

        let ob = oaxaca_blinder(&frame, CovariateSet::Full, &DecomposeConfig::default()).unwrap();
        assert!((rec.minus_unexplained + ob.unexplained).abs() < 1e-12);
    }
}

#[test]
fn decomposition_adds_up_for_both_references() {
    for seed in 10..15 {
        let frame = saturated_frame(seed);
        for set in [CovariateSet::Unconditional, CovariateSet::HumanCapital, CovariateSet::Full] {
            for reference in [Reference::Male, Reference::Female] {
                let cfg = DecomposeConfig {
                    reference,
                    ..Default::default()
                };
                let r = oaxaca_blinder(&frame, set, &cfg).unwrap();
                assert!((r.explained + r.unexplained - r.total_gap).abs() < 1e-10);
                assert!((r.ratio_unconditional - (-r.total_gap).exp()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn equal_groups_have_no_unexplained_gap() {
    // identical outcome law for both groups and the full set of moderators
    let frame = generate(&DgpSpec {
        n: 400,
        p1: 4,
        p2: 4,
        alpha: 1.0,
        beta: vec![0.0; 4],
        delta: vec![(1, 0.5), (2, 0.2)],
        noise: Noise::Homoscedastic { sigma: 0.0 },
        rho: 0.2,
        treatment: Treatment::Random { prob: 0.5 },
        seed: 2,
    })
    .unwrap()
    .0;
    let r = oaxaca_blinder(&frame, CovariateSet::Full, &DecomposeConfig::default()).unwrap();
    assert!(r.unexplained.abs() < 1e-10);
    assert!((r.explained - r.total_gap).abs() < 1e-10);
    assert!((r.ratio_conditional - 1.0).abs() < 1e-10);
}
