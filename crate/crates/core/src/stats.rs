//! Distribution helpers: normal quantiles, order-statistic quantiles and
//! one-sample Kolmogorov-Smirnov tests.

use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal quantile Φ⁻¹(p).
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Two-sided normal critical value z_{(1+level)/2}.
pub fn two_sided_z(level: f64) -> f64 {
    normal_quantile(0.5 * (1.0 + level))
}

/// Inverse-ECDF quantile: the ⌈q·m⌉-th order statistic of `sorted`
/// (1-based, clamped to [1, m]).
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    sorted[order_rank(sorted.len(), q)]
}

/// Zero-based index of the ⌈q·m⌉-th order statistic.
pub fn order_rank(m: usize, q: f64) -> usize {
    let k = (q * m as f64).ceil() as usize;
    k.clamp(1, m) - 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `sample` against the continuous CDF `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsResult {
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival((m.sqrt() + 0.12 + 0.11 / m.sqrt()) * d),
    }
}

pub fn ks_uniform(sample: &[f64]) -> KsResult {
    ks_test(sample, |x| x.clamp(0.0, 1.0))
}

pub fn ks_std_normal(sample: &[f64]) -> KsResult {
    ks_test(sample, normal_cdf)
}

/// P(K > t) for the Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Binomial standard error of a proportion estimated from `m` trials.
pub fn binomial_se(p: f64, m: usize) -> f64 {
    if m == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / m as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_reference_values() {
        assert!((normal_quantile(0.95) - 1.6448536269514722).abs() < 1e-9);
        assert!((two_sided_z(0.95) - 1.959963984540054).abs() < 1e-9);
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn order_statistic_median_of_three() {
        assert_eq!(order_statistic(&[-0.3, -0.1, 0.2], 0.5), -0.1);
        assert_eq!(order_statistic(&[1.0, 2.0], 0.0), 1.0);
        assert_eq!(order_statistic(&[1.0, 2.0], 1.0), 2.0);
    }

    #[test]
    fn kolmogorov_critical_value() {
        // 1% critical point of the limiting distribution.
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 2e-4);
    }

    #[test]
    fn ks_accepts_uniform_grid() {
        let xs: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
        let r = ks_uniform(&xs);
        assert!(r.statistic <= 0.001 + 1e-12);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn ks_rejects_shifted_sample() {
        let xs: Vec<f64> = (0..500).map(|i| ((i as f64 + 0.5) / 500.0).powi(2)).collect();
        assert!(ks_uniform(&xs).p_value < 1e-6);
    }
}
