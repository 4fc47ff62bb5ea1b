use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hetgap::bootstrap::{joint_inference, JointTestResult};
use hetgap::dataprep::{
    apply_filters, build_model_frame, load_csv, read_frame, write_frame, Dataset, DimensionReport,
    FilterDrop, ModelFrame, Role, DESIGN_FILE,
};
use hetgap::decompose::{oaxaca_blinder, CovariateSet, DecompositionResult, Reference};
use hetgap::dsinfer::{double_selection, effect_profile, EffectProfile, EffectRow, InferenceReport};
use hetgap::report::{
    default_grid, effect_interval_plot, quantile_curve, read_csv, write_csv_file, write_svg, PlotData,
    QuantileCurve,
};
use hetgap::synth::{acs_csv, monte_carlo, AcsSpec, MonteCarloTable};
use hetgap::{Error, Execution, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::write_manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Everything a command needs after flags have been folded into the config.
pub struct Context {
    pub cfg: RunConfig,
    pub base: PathBuf,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl Context {
    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.cfg.data.as_ref().map(|p| self.base.join(p))
    }

    pub fn groups(&self) -> Vec<String> {
        match &self.cfg.subgroups {
            Some(s) => s.groups.keys().cloned().collect(),
            None => vec!["all".to_string()],
        }
    }

    fn dir(&self, parts: &[&str]) -> Result<PathBuf> {
        let mut p = self.out.clone();
        p.extend(parts);
        fs::create_dir_all(&p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
        Ok(p)
    }

    /// Config copy and manifest; called at the end of every command so the
    /// run directory always describes itself.
    pub fn finish(&self) -> Result<()> {
        let canonical = self.cfg.canonical();
        let path = self.dir(&[])?.join("config.toml");
        fs::write(&path, &canonical).map_err(|e| Error::Io { path, source: e })?;
        write_manifest(&self.out, &canonical, self.data_path().as_deref())
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable output") + "\n";
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn require(path: &Path, step: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "missing {}; run `hetgap {step}` with this config and output directory first",
            path.display()
        )))
    }
}

#[derive(Debug, Serialize)]
struct GroupSummary {
    dims: DimensionReport,
    n_female: usize,
    n_male: usize,
}

#[derive(Debug, Serialize)]
struct PrepareSummary {
    rows_read: usize,
    rows_kept: usize,
    missingness: BTreeMap<String, usize>,
    filter_drops: Vec<FilterDrop>,
    groups: BTreeMap<String, GroupSummary>,
}

fn load_dataset(ctx: &Context) -> Result<Dataset> {
    let schema = ctx.cfg.schema()?;
    let path = ctx
        .data_path()
        .ok_or_else(|| Error::Config("config has no `data` path".into()))?;
    if !path.exists() {
        return Err(Error::Config(format!("data file {} does not exist", path.display())));
    }
    let raw = load_csv(&path, schema)?;
    apply_filters(&raw, &schema.filters)
}

fn split(ctx: &Context, ds: Dataset) -> Result<Vec<(String, Dataset)>> {
    let Some(sub) = &ctx.cfg.subgroups else {
        return Ok(vec![("all".to_string(), ds)]);
    };
    let groups: Vec<(String, Vec<String>)> = sub.groups.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut parts = ds.split_by(&sub.column, &groups)?;
    for (_, part) in &mut parts {
        // constant within a stratum
        if let Some(c) = part.schema.columns.iter_mut().find(|c| c.name == sub.column) {
            if c.role == Role::Moderator {
                c.role = Role::Metadata;
            }
        }
    }
    Ok(parts)
}

pub fn prepare(ctx: &Context) -> Result<()> {
    let ds = load_dataset(ctx)?;
    let mut summary = PrepareSummary {
        rows_read: ds.n_rows() + ds.dropped_rows,
        rows_kept: ds.n_rows(),
        missingness: ds.missingness.clone(),
        filter_drops: ds.filter_drops.clone(),
        groups: BTreeMap::new(),
    };
    for (name, part) in split(ctx, ds)? {
        let frame = build_model_frame(&part)?;
        info!(
            "group {name}: n = {}, p1 = {}, p2 = {}",
            frame.n(),
            frame.p1(),
            frame.p2()
        );
        write_frame(&ctx.dir(&["frames", &name])?, &frame)?;
        let n_female = frame.treated_rows().len();
        summary.groups.insert(
            name,
            GroupSummary {
                dims: frame.report.clone(),
                n_female,
                n_male: frame.n() - n_female,
            },
        );
    }
    write_json(&summary, &ctx.dir(&["prepare"])?.join("summary.json"))
}

fn load_frame(ctx: &Context, group: &str) -> Result<ModelFrame> {
    let dir = ctx.out.join("frames").join(group);
    require(&dir.join(DESIGN_FILE), "prepare")?;
    read_frame(&dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    /// Row of the prepared frame.
    pub row: usize,
    pub effect: f64,
    pub se: f64,
    pub band_halfwidth: f64,
    pub lower: f64,
    pub upper: f64,
    pub significant_negative: bool,
    pub significant_positive: bool,
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    group: &'a str,
    penalty_c: f64,
    inference: InferenceReport,
    profile_cv: f64,
    profile_rows: usize,
    share_significant_negative: f64,
    share_significant_positive: f64,
}

pub fn fit(ctx: &Context) -> Result<()> {
    let mut ds = ctx.cfg.model.clone();
    ds.execution = Execution::default();
    let mut boot = ctx.cfg.bootstrap.clone();
    boot.execution = Execution::default();
    for group in ctx.groups() {
        let frame = load_frame(ctx, &group)?;
        let fit = double_selection(&frame, &ds)?;
        let women = frame.treated_rows();
        let xw = frame.x_rows(&women);
        let joint: JointTestResult = joint_inference(&fit.scores, &fit.beta, Some(&xw), &boot)?;
        let cv = joint.cv_profile.unwrap_or(joint.cv_coefficients);
        let profile = effect_profile(&fit, &xw, cv, boot.level);
        info!(
            "group {group}: {} controls selected, sup-t {:.3} (cv {:.3}, p = {:.4})",
            fit.union_support.len(),
            joint.statistic,
            joint.critical_value,
            joint.p_value
        );
        let dir = ctx.dir(&["fit", &group])?;
        let inference = InferenceReport::new(&fit, &frame, &joint);
        write_csv_file(&inference.targets, &dir.join("marginal_effects.csv"))?;
        let rows: Vec<ProfileRow> = women
            .iter()
            .enumerate()
            .map(|(k, &row)| ProfileRow {
                row,
                effect: profile.effects[k],
                se: profile.se_pointwise[k],
                band_halfwidth: profile.band_halfwidth[k],
                lower: profile.effects[k] - profile.band_halfwidth[k],
                upper: profile.effects[k] + profile.band_halfwidth[k],
                significant_negative: profile.significant_negative[k],
                significant_positive: profile.significant_positive[k],
            })
            .collect();
        write_csv_file(&rows, &dir.join("profile.csv"))?;
        let out = FitOutput {
            group: &group,
            penalty_c: ds.penalty.c,
            inference,
            profile_cv: profile.cv,
            profile_rows: rows.len(),
            share_significant_negative: profile.quantiles.share_significant_negative,
            share_significant_positive: profile.quantiles.share_significant_positive,
        };
        write_json(&out, &dir.join("inference.json"))?;
    }
    Ok(())
}

/// Flat view of a decomposition for CSV.
#[derive(Debug, Serialize)]
struct DecompositionRow {
    set: CovariateSet,
    reference: Reference,
    total_gap: f64,
    explained: f64,
    unexplained: f64,
    ratio_unconditional: f64,
    ratio_conditional: f64,
    n_m: usize,
    n_f: usize,
    n_columns: usize,
}

impl From<&DecompositionResult> for DecompositionRow {
    fn from(r: &DecompositionResult) -> Self {
        Self {
            set: r.set,
            reference: r.reference,
            total_gap: r.total_gap,
            explained: r.explained,
            unexplained: r.unexplained,
            ratio_unconditional: r.ratio_unconditional,
            ratio_conditional: r.ratio_conditional,
            n_m: r.n_m,
            n_f: r.n_f,
            n_columns: r.columns.len(),
        }
    }
}

pub fn decompose(ctx: &Context) -> Result<()> {
    for group in ctx.groups() {
        let frame = load_frame(ctx, &group)?;
        let results = ctx
            .cfg
            .decompose
            .sets
            .iter()
            .map(|&set| oaxaca_blinder(&frame, set, &ctx.cfg.decompose))
            .collect::<Result<Vec<_>>>()?;
        for r in &results {
            info!(
                "group {group}, {:?}: gap {:.4}, unexplained {:.4}, ratio {:.4}",
                r.set, r.total_gap, r.unexplained, r.ratio_conditional
            );
        }
        let dir = ctx.dir(&["decompose", &group])?;
        if ctx.wants(Format::Json) {
            write_json(&results, &dir.join("decomposition.json"))?;
        }
        if ctx.wants(Format::Csv) {
            let rows: Vec<DecompositionRow> = results.iter().map(Into::into).collect();
            write_csv_file(&rows, &dir.join("decomposition.csv"))?;
        }
    }
    Ok(())
}

fn read_csv_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    require(path, "fit")?;
    let f = fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_csv(f)
}

fn profile_from_rows(rows: &[ProfileRow], cv: f64) -> EffectProfile {
    EffectProfile {
        effects: rows.iter().map(|r| r.effect).collect(),
        se_pointwise: rows.iter().map(|r| r.se).collect(),
        pointwise_halfwidth: Vec::new(),
        band_halfwidth: rows.iter().map(|r| r.band_halfwidth).collect(),
        cv,
        significant_negative: rows.iter().map(|r| r.significant_negative).collect(),
        significant_positive: rows.iter().map(|r| r.significant_positive).collect(),
        quantiles: QuantileCurve::default(),
    }
}

pub fn report(ctx: &Context) -> Result<()> {
    let grid = ctx.cfg.report.grid.clone().unwrap_or_else(default_grid);
    let style = &ctx.cfg.report.style;
    for group in ctx.groups() {
        let fit_dir = ctx.out.join("fit").join(&group);
        let rows: Vec<ProfileRow> = read_csv_file(&fit_dir.join("profile.csv"))?;
        let table: Vec<EffectRow> = read_csv_file(&fit_dir.join("marginal_effects.csv"))?;
        let dir = ctx.dir(&["report", &group])?;
        if rows.is_empty() {
            warn!("group {group}: empty effect profile, no quantile curve");
        } else {
            let fit_json: serde_json::Value = read_json(&fit_dir.join("inference.json"))?;
            let cv = fit_json["profile_cv"].as_f64().unwrap_or(f64::NAN);
            let curve = quantile_curve(&profile_from_rows(&rows, cv), &grid);
            if ctx.wants(Format::Csv) {
                write_csv_file(&curve.rows(), &dir.join("quantile_curve.csv"))?;
            }
            if ctx.wants(Format::Json) {
                write_json(&curve, &dir.join("quantile_curve.json"))?;
            }
            if ctx.wants(Format::Svg) {
                let plot = PlotData::Quantiles {
                    title: format!("Gender gap by quantile ({group})"),
                    curve,
                };
                write_svg(&plot, style, &dir.join("quantile_curve.svg"))?;
            }
        }
        for var in &ctx.cfg.report.group_by {
            let plot = effect_interval_plot(&table, var)?;
            if ctx.wants(Format::Csv) {
                write_csv_file(&plot.points, &dir.join(format!("intervals_{var}.csv")))?;
            }
            if ctx.wants(Format::Json) {
                write_json(&plot, &dir.join(format!("intervals_{var}.json")))?;
            }
            if ctx.wants(Format::Svg) {
                write_svg(&PlotData::Intervals(plot), style, &dir.join(format!("intervals_{var}.svg")))?;
            }
        }
    }
    Ok(())
}

pub fn simulate(ctx: &Context, sample: Option<&Path>, rows: usize, seed: Option<u64>) -> Result<()> {
    if let Some(path) = sample {
        let spec = AcsSpec {
            n: rows,
            seed: seed.unwrap_or(AcsSpec::default().seed),
        };
        fs::write(path, acs_csv(&spec)).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        info!("wrote {} synthetic records to {}", rows, path.display());
        return Ok(());
    }
    let mut spec = ctx
        .cfg
        .simulate
        .clone()
        .ok_or_else(|| Error::Config("config has no [simulate] section".into()))?;
    spec.execution = Execution::default();
    let table: MonteCarloTable = monte_carlo(&spec)?;
    info!(
        "{} replications ({} failed): joint rejection {:.3}",
        table.replications, table.failures, table.joint_rejection
    );
    let dir = ctx.dir(&["simulate"])?;
    if ctx.wants(Format::Json) {
        write_json(&table, &dir.join("montecarlo.json"))?;
    }
    if ctx.wants(Format::Csv) {
        write_csv_file(&table.targets, &dir.join("montecarlo.csv"))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    group: String,
    n: usize,
    n_female: usize,
    n_male: usize,
    p1: usize,
    p2: usize,
    mean_log_wage_female: f64,
    mean_log_wage_male: f64,
    raw_gap: f64,
}

pub fn summary(ctx: &Context) -> Result<Vec<String>> {
    let mut rows = Vec::new();
    for group in ctx.groups() {
        let frame = load_frame(ctx, &group)?;
        let mean = |female: bool| {
            let v: Vec<f64> = (0..frame.n())
                .filter(|&i| (frame.d[i] == 1.0) == female)
                .map(|i| frame.y[i])
                .collect();
            (v.iter().sum::<f64>() / v.len() as f64, v.len())
        };
        let ((mf, nf), (mm, nm)) = (mean(true), mean(false));
        rows.push(SummaryRow {
            group,
            n: frame.n(),
            n_female: nf,
            n_male: nm,
            p1: frame.p1(),
            p2: frame.p2(),
            mean_log_wage_female: mf,
            mean_log_wage_male: mm,
            raw_gap: mm - mf,
        });
    }
    let dir = ctx.dir(&["summary"])?;
    if ctx.wants(Format::Json) {
        write_json(&rows, &dir.join("summary.json"))?;
    }
    if ctx.wants(Format::Csv) {
        write_csv_file(&rows, &dir.join("summary.csv"))?;
    }
    Ok(rows
        .iter()
        .map(|r| {
            format!(
                "{}: n = {} ({} women), p1 = {}, p2 = {}, raw log gap {:.4}",
                r.group, r.n, r.n_female, r.p1, r.p2, r.raw_gap
            )
        })
        .collect())
}
