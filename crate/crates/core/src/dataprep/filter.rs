use log::info;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// Keep age ≥ threshold (years).
    MinAge,
    /// Keep age ≤ threshold (years).
    MaxAge,
    /// Keep annual income ≥ threshold (dollars). Defaults to the outcome
    /// column when no column is given.
    MinAnnualIncome,
    /// Keep usual hours ≥ threshold (hours/week).
    FullTimeHours,
    /// Keep weeks worked ≥ threshold (weeks/year).
    FullYearWeeks,
    /// Keep rows where `column op threshold`.
    CustomPredicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl CompareOp {
    fn holds(self, x: f64, t: f64) -> bool {
        match self {
            CompareOp::Ge => x >= t,
            CompareOp::Gt => x > t,
            CompareOp::Le => x <= t,
            CompareOp::Lt => x < t,
            CompareOp::Eq => x == t,
            CompareOp::Ne => x != t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub kind: FilterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<CompareOp>,
}

impl FilterRule {
    pub fn new(kind: FilterKind, column: &str, threshold: f64) -> Self {
        Self {
            kind,
            column: Some(column.to_string()),
            threshold,
            op: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::Config(format!(
                "filter {:?}: threshold must be finite and nonnegative, got {}",
                self.kind, self.threshold
            )));
        }
        match self.kind {
            FilterKind::CustomPredicate if self.op.is_none() || self.column.is_none() => {
                Err(Error::Config("custom_predicate needs `column` and `op`".into()))
            }
            FilterKind::MinAnnualIncome => Ok(()),
            _ if self.column.is_none() => {
                Err(Error::Config(format!("filter {:?} needs a `column`", self.kind)))
            }
            _ => Ok(()),
        }
    }

    fn op(&self) -> CompareOp {
        match self.kind {
            FilterKind::MaxAge => CompareOp::Le,
            FilterKind::CustomPredicate => self.op.unwrap_or(CompareOp::Ge),
            _ => CompareOp::Ge,
        }
    }

    fn values(&self, ds: &Dataset) -> Result<Vec<f64>> {
        match (&self.kind, &self.column) {
            (FilterKind::MinAnnualIncome, None) => ds.annual_income(),
            (_, Some(col)) => {
                if !ds.columns.contains_key(col) {
                    return Err(Error::Schema(format!(
                        "filter {:?} references absent column `{col}`",
                        self.kind
                    )));
                }
                let is_outcome = ds.schema.outcome().map(|o| &o.name == col).unwrap_or(false);
                if self.kind == FilterKind::MinAnnualIncome && is_outcome {
                    ds.annual_income()
                } else {
                    Ok(ds.numeric(col)?.to_vec())
                }
            }
            (_, None) => Err(Error::Config(format!("filter {:?} needs a `column`", self.kind))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDrop {
    pub rule: String,
    pub dropped: usize,
}

/// Applies rules in order, keeping rows that satisfy every rule. Each
/// rule's drop count covers rows that survived the preceding rules.
pub fn apply_filters(ds: &Dataset, rules: &[FilterRule]) -> Result<Dataset> {
    let mut current = ds.clone();
    for rule in rules {
        rule.validate()?;
        let values = rule.values(&current)?;
        let op = rule.op();
        let keep: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, &x)| op.holds(x, rule.threshold))
            .map(|(i, _)| i)
            .collect();
        let dropped = current.n_rows() - keep.len();
        let name = match &rule.column {
            Some(c) => format!("{:?}({c} {:?} {})", rule.kind, op, rule.threshold),
            None => format!("{:?}({:?} {})", rule.kind, op, rule.threshold),
        };
        info!("filter {name}: dropped {dropped} rows");
        let mut next = current.select_rows(&keep);
        next.filter_drops.push(FilterDrop { rule: name, dropped });
        current = next;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::load_csv_reader;
    use crate::dataprep::SchemaConfig;

    fn dataset() -> Dataset {
        let schema = SchemaConfig::from_toml(
            r#"
[columns.incwage]
kind = "continuous"
role = "outcome"
[columns.female]
kind = "binary"
role = "treatment"
[columns.age]
kind = "continuous"
role = "metadata"
"#,
        )
        .unwrap();
        let csv = "incwage,female,age\n30000,1,24\n12687.49,0,30\n12687.50,1,40\n50000,0,65\n50000,0,66\n";
        load_csv_reader(csv.as_bytes(), &schema, "test").unwrap()
    }

    #[test]
    fn age_window() {
        let ds = dataset();
        let out = apply_filters(
            &ds,
            &[
                FilterRule::new(FilterKind::MinAge, "age", 25.0),
                FilterRule::new(FilterKind::MaxAge, "age", 65.0),
            ],
        )
        .unwrap();
        assert_eq!(out.numeric("age").unwrap(), &[30.0, 40.0, 65.0]);
        assert_eq!(out.filter_drops[0].dropped, 1);
        assert_eq!(out.filter_drops[1].dropped, 1);
    }

    #[test]
    fn minimum_wage_threshold() {
        let ds = dataset();
        let rule = FilterRule {
            kind: FilterKind::MinAnnualIncome,
            column: None,
            threshold: 12_687.50,
            op: None,
        };
        let out = apply_filters(&ds, &[rule]).unwrap();
        let inc = out.numeric("incwage").unwrap();
        assert!(!inc.contains(&12_687.49));
        assert!(inc.contains(&12_687.50));
        // weekly earnings are annual / 52
        let w = out.weekly_wage().unwrap();
        assert!((w[0] - 30000.0 / 52.0).abs() < 1e-12);
    }

    #[test]
    fn empty_rules_identity() {
        let ds = dataset();
        let out = apply_filters(&ds, &[]).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn absent_column_is_schema_error() {
        let ds = dataset();
        let r = apply_filters(&ds, &[FilterRule::new(FilterKind::FullTimeHours, "uhrswork", 35.0)]);
        assert!(matches!(r, Err(Error::Schema(m)) if m.contains("uhrswork")));
    }

    #[test]
    fn negative_threshold_rejected() {
        let ds = dataset();
        let r = apply_filters(&ds, &[FilterRule::new(FilterKind::MinAge, "age", -1.0)]);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn custom_predicate() {
        let ds = dataset();
        let rule = FilterRule {
            kind: FilterKind::CustomPredicate,
            column: Some("female".into()),
            threshold: 1.0,
            op: Some(CompareOp::Eq),
        };
        let out = apply_filters(&ds, &[rule]).unwrap();
        assert_eq!(out.n_rows(), 2);
    }
}
