//! Rendered figures compared byte for byte with files in tests/golden.
//! Set `UPDATE_GOLDEN=1` to rewrite them after an intended change.

use std::path::PathBuf;

use hetgap::dsinfer::{EffectProfile, EffectRow};
use hetgap::report::{default_grid, effect_interval_plot, quantile_curve, render_svg, PlotData, QuantileCurve, SvgStyle};

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(actual, expected, "{name} differs from the golden file");
}

fn profile() -> EffectProfile {
    let effects: Vec<f64> = (0..40).map(|i| ((i * 17) % 40) as f64 / 40.0 - 0.7).collect();
    let hw: Vec<f64> = (0..40).map(|i| 0.08 + 0.002 * i as f64).collect();
    EffectProfile {
        significant_negative: effects.iter().zip(&hw).map(|(e, h)| e + h < 0.0).collect(),
        significant_positive: effects.iter().zip(&hw).map(|(e, h)| e - h > 0.0).collect(),
        se_pointwise: hw.iter().map(|h| h / 2.5).collect(),
        pointwise_halfwidth: hw.iter().map(|h| h * 0.8).collect(),
        band_halfwidth: hw,
        effects,
        cv: 2.5,
        quantiles: QuantileCurve::default(),
    }
}

#[test]
fn quantile_curve_svg() {
    let curve = quantile_curve(&profile(), &default_grid());
    let svg = render_svg(
        &PlotData::Quantiles {
            title: "Gender gap by quantile (test)".into(),
            curve,
        },
        &SvgStyle::default(),
    );
    golden("quantile_curve.svg", &svg);
}

#[test]
fn interval_plot_svg() {
    let row = |label: &str, est: f64, hw: f64| EffectRow {
        label: label.into(),
        estimate: est,
        se: hw / 2.5,
        ci_lower: est - 0.8 * hw,
        ci_upper: est + 0.8 * hw,
        sim_lower: est - hw,
        sim_upper: est + hw,
        significant: (est - hw) * (est + hw) > 0.0,
    };
    let table = vec![
        row("(Intercept)", -0.25, 0.05),
        row("occ=sales", -0.12, 0.04),
        row("occ=office", 0.02, 0.05),
        row("occ=service & care", 0.09, 0.03),
        row("exper", 0.001, 0.002),
    ];
    let plot = effect_interval_plot(&table, "occ").unwrap();
    golden("intervals_occ.svg", &render_svg(&PlotData::Intervals(plot), &SvgStyle::default()));
}
