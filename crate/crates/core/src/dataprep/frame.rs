use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::encode::{encode, expand_interactions, ColumnLabel};
use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    /// p1 + p2 + 1.
    pub p: usize,
    pub dropped_columns: Vec<String>,
    pub dropped_rows: usize,
}

/// Numerical design of the interacted wage equation
/// `y = α + (x'β)·d + z'δ + ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFrame {
    /// Log weekly wage.
    pub y: Vec<f64>,
    /// Treatment indicator in {0, 1}.
    pub d: Vec<f64>,
    /// Moderators, first column the intercept (n × p1).
    pub x: DMatrix<f64>,
    /// Controls, first column the constant (n × p2).
    pub z: DMatrix<f64>,
    pub x_labels: Vec<ColumnLabel>,
    pub z_labels: Vec<ColumnLabel>,
    pub report: DimensionReport,
}

impl ModelFrame {
    pub fn new(
        y: Vec<f64>,
        d: Vec<f64>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        x_labels: Vec<ColumnLabel>,
        z_labels: Vec<ColumnLabel>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Data("empty model frame".into()));
        }
        if d.len() != n || x.nrows() != n || z.nrows() != n {
            return Err(Error::Data("model frame blocks disagree on n".into()));
        }
        if x.ncols() != x_labels.len() || z.ncols() != z_labels.len() {
            return Err(Error::Data("label count does not match column count".into()));
        }
        if d.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Data("treatment must take values in {0, 1}".into()));
        }
        if linalg::is_constant(&d) {
            return Err(Error::Data("treatment has zero variance".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite outcome".into()));
        }
        let report = DimensionReport {
            n,
            p1: x.ncols(),
            p2: z.ncols(),
            p: x.ncols() + z.ncols() + 1,
            dropped_columns: Vec::new(),
            dropped_rows: 0,
        };
        Ok(Self {
            y,
            d,
            x,
            z,
            x_labels,
            z_labels,
            report,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p1(&self) -> usize {
        self.x.ncols()
    }

    pub fn p2(&self) -> usize {
        self.z.ncols()
    }

    /// Target regressors d_i·x_ij (n × p1).
    pub fn targets(&self) -> DMatrix<f64> {
        let mut t = self.x.clone();
        for mut col in t.column_iter_mut() {
            for (v, d) in col.iter_mut().zip(&self.d) {
                *v *= d;
            }
        }
        t
    }

    pub fn treated_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.d[i] == 1.0).collect()
    }

    /// Moderator rows for the given observations.
    pub fn x_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.p1(), |r, j| self.x[(rows[r], j)])
    }
}

/// y = ln(weekly wage), d = treatment, X = intercept + encoded moderators,
/// Z = constant + moderators + pairwise interactions.
pub fn build_model_frame(ds: &Dataset) -> Result<ModelFrame> {
    let weekly = ds.weekly_wage()?;
    let keep: Vec<usize> = (0..weekly.len()).filter(|&i| weekly[i] > 0.0).collect();
    let rejected = weekly.len() - keep.len();
    let ds = if rejected > 0 {
        warn!("rejected {rejected} rows with nonpositive wage");
        ds.select_rows(&keep)
    } else {
        ds.clone()
    };
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::Data("no rows with positive wage".into()));
    }
    let y: Vec<f64> = ds.weekly_wage()?.iter().map(|w| w.ln()).collect();
    let treatment = ds.schema.treatment()?;
    let d = ds.numeric(&treatment.name)?.to_vec();
    if linalg::is_constant(&d) {
        return Err(Error::Data(format!(
            "treatment `{}` has zero variance",
            treatment.name
        )));
    }

    let enc = encode(&ds)?;
    let mut dropped = Vec::new();
    let mut x_labels = vec![ColumnLabel::intercept()];
    let mut x_data: Vec<f64> = vec![1.0; n];
    for c in &enc.columns {
        let target: Vec<f64> = c.values.iter().zip(&d).map(|(a, b)| a * b).collect();
        if linalg::is_constant(&c.values) {
            dropped.push(c.label.to_string());
        } else if linalg::is_constant(&target) {
            dropped.push(format!("{}:{}", treatment.name, c.label));
        } else {
            x_labels.push(c.label.clone());
            x_data.extend_from_slice(&c.values);
        }
    }
    let x = DMatrix::from_vec(n, x_labels.len(), x_data);
    let zb = expand_interactions(&enc)?;
    for name in &zb.dropped {
        if !dropped.contains(name) {
            dropped.push(name.clone());
        }
    }

    let mut frame = ModelFrame::new(y, d, x, zb.matrix, x_labels, zb.labels)?;
    frame.report.dropped_columns = dropped;
    frame.report.dropped_rows = ds.dropped_rows;
    info!(
        "model frame: n = {}, p1 = {}, p2 = {}, p = {}",
        frame.report.n, frame.report.p1, frame.report.p2, frame.report.p
    );
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::{load_csv_reader, SchemaConfig};

    fn schema() -> SchemaConfig {
        SchemaConfig::from_toml(
            r#"
income_form = "weekly"
[columns.wage]
kind = "continuous"
role = "outcome"
[columns.female]
kind = "binary"
role = "treatment"
[columns.grp]
kind = "categorical"
baseline = "A"
role = "moderator"
[columns.educ]
kind = "continuous"
role = "moderator"
"#,
        )
        .unwrap()
    }

    #[test]
    fn log_of_median_female_wage() {
        let csv = "wage,female,grp,educ\n692.31,1,A,12\n923.08,0,B,13\n800,1,B,12\n700,0,A,14\n";
        let f = build_model_frame(&load_csv_reader(csv.as_bytes(), &schema(), "t").unwrap()).unwrap();
        assert!((f.y[0] - 692.31f64.ln()).abs() < 1e-12);
        assert!((f.y[0] - 6.5401).abs() < 1e-4);
        assert_eq!(f.report.p, f.report.p1 + f.report.p2 + 1);
        assert_eq!(f.x_labels[0], ColumnLabel::intercept());
    }

    #[test]
    fn all_zero_treatment_is_rejected() {
        let csv = "wage,female,grp,educ\n692.31,0,A,12\n923.08,0,B,13\n";
        let r = build_model_frame(&load_csv_reader(csv.as_bytes(), &schema(), "t").unwrap());
        assert!(matches!(r, Err(Error::Data(m)) if m.contains("zero variance")));
    }

    #[test]
    fn nonpositive_wage_rows_rejected() {
        let csv = "wage,female,grp,educ\n0,1,A,12\n923.08,0,B,13\n800,1,B,12\n700,0,A,14\n-5,1,A,9\n";
        let f = build_model_frame(&load_csv_reader(csv.as_bytes(), &schema(), "t").unwrap()).unwrap();
        assert_eq!(f.n(), 3);
        assert_eq!(f.report.dropped_rows, 2);
    }

    #[test]
    fn target_with_no_treated_variation_dropped() {
        // grp=B occurs only among men
        let csv = "wage,female,grp,educ\n600,1,A,12\n923.08,0,B,13\n800,1,A,11\n700,0,A,14\n";
        let f = build_model_frame(&load_csv_reader(csv.as_bytes(), &schema(), "t").unwrap()).unwrap();
        assert!(f.x_labels.iter().all(|l| l.to_string() != "grp=B"));
        assert!(f.report.dropped_columns.contains(&"female:grp=B".to_string()));
        assert!(f.z_labels.iter().any(|l| l.to_string() == "grp=B"));
    }
}
