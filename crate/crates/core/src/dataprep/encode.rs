use std::collections::BTreeSet;
use std::fmt;

use log::info;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::schema::ColumnKind;
use super::{ColumnData, Dataset};
use crate::error::{Error, Result};

const INTERCEPT: &str = "(Intercept)";

/// One factor of a column label: a variable, or one level of a categorical.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelPart {
    pub variable: String,
    pub level: Option<String>,
}

/// Name of an encoded column: a product of label parts. The empty product
/// is the intercept. Printed as `var`, `var=level`, or `a:b=level`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ColumnLabel {
    pub parts: Vec<LabelPart>,
}

impl ColumnLabel {
    pub fn intercept() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn variable(name: &str) -> Self {
        Self {
            parts: vec![LabelPart {
                variable: name.to_string(),
                level: None,
            }],
        }
    }

    pub fn level(name: &str, level: &str) -> Self {
        Self {
            parts: vec![LabelPart {
                variable: name.to_string(),
                level: Some(level.to_string()),
            }],
        }
    }

    pub fn is_intercept(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn interact(&self, other: &ColumnLabel) -> ColumnLabel {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        ColumnLabel { parts }
    }

    /// Source variables, in label order.
    pub fn variables(&self) -> Vec<&str> {
        self.parts.iter().map(|p| p.variable.as_str()).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == INTERCEPT {
            return Ok(Self::intercept());
        }
        let mut parts = Vec::new();
        for piece in s.split(':') {
            let (variable, level) = match piece.split_once('=') {
                Some((v, l)) => (v, Some(l.to_string())),
                None => (piece, None),
            };
            if variable.is_empty() || level.as_deref() == Some("") {
                return Err(Error::Data(format!("malformed column label `{s}`")));
            }
            parts.push(LabelPart {
                variable: variable.to_string(),
                level,
            });
        }
        Ok(Self { parts })
    }
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return f.write_str(INTERCEPT);
        }
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            f.write_str(&p.variable)?;
            if let Some(l) = &p.level {
                write!(f, "={l}")?;
            }
        }
        Ok(())
    }
}

impl From<ColumnLabel> for String {
    fn from(l: ColumnLabel) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for ColumnLabel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        ColumnLabel::parse(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedColumn {
    pub label: ColumnLabel,
    pub values: Vec<f64>,
}

/// Encoded initial regressors, ordered lexicographically by label.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub n: usize,
    pub columns: Vec<EncodedColumn>,
}

/// Dummy-codes categoricals against their baseline (k−1 columns), passes
/// binary and continuous moderators through, and appends derived squares.
pub fn encode(ds: &Dataset) -> Result<Encoded> {
    let n = ds.n_rows();
    let mut columns = Vec::new();
    for col in ds.schema.moderators() {
        match (col.kind, ds.columns.get(&col.name)) {
            (ColumnKind::Categorical, Some(ColumnData::Categorical(vals))) => {
                let baseline = col.baseline.as_deref().unwrap_or_default();
                let levels: BTreeSet<&str> = vals.iter().map(|s| s.as_str()).collect();
                if !levels.contains(baseline) {
                    return Err(Error::Config(format!(
                        "baseline `{baseline}` of `{}` does not occur in the data (levels: {})",
                        col.name,
                        levels.iter().copied().collect::<Vec<_>>().join(", ")
                    )));
                }
                for level in levels.into_iter().filter(|l| *l != baseline) {
                    columns.push(EncodedColumn {
                        label: ColumnLabel::level(&col.name, level),
                        values: vals.iter().map(|v| f64::from(u8::from(v == level))).collect(),
                    });
                }
            }
            (_, Some(ColumnData::Numeric(vals))) => columns.push(EncodedColumn {
                label: ColumnLabel::variable(&col.name),
                values: vals.clone(),
            }),
            _ => {
                return Err(Error::Schema(format!(
                    "moderator `{}` missing or of the wrong type",
                    col.name
                )))
            }
        }
    }
    for d in &ds.schema.derived {
        let src = ds.numeric(&d.square_of)?;
        columns.push(EncodedColumn {
            label: ColumnLabel::variable(&d.name),
            values: src.iter().map(|x| x * x * d.scale).collect(),
        });
    }
    columns.sort_by_key(|c| c.label.to_string());
    Ok(Encoded { n, columns })
}

/// Control block: constant, initial regressors, then all pairwise products
/// in lexicographic parent order. Zero-variance columns are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ZBlock {
    pub labels: Vec<ColumnLabel>,
    pub matrix: DMatrix<f64>,
    pub dropped: Vec<String>,
}

pub fn expand_interactions(enc: &Encoded) -> Result<ZBlock> {
    let n = enc.n;
    let initial: Vec<&EncodedColumn> = enc.columns.iter().collect();
    let mut dropped = Vec::new();
    let live: Vec<&EncodedColumn> = initial
        .into_iter()
        .filter(|c| {
            let keep = !crate::linalg::is_constant(&c.values);
            if !keep {
                dropped.push(c.label.to_string());
            }
            keep
        })
        .collect();
    let k = live.len();
    let max_cols = 1 + k + k * k.saturating_sub(1) / 2;
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(n * max_cols).map_err(|_| {
        Error::Data(format!(
            "cannot allocate interaction design of {n} x {max_cols} ({:.1} GiB)",
            (n * max_cols * 8) as f64 / (1u64 << 30) as f64
        ))
    })?;
    let mut labels = Vec::with_capacity(max_cols);

    data.extend(std::iter::repeat_n(1.0, n));
    labels.push(ColumnLabel::intercept());
    for c in &live {
        data.extend_from_slice(&c.values);
        labels.push(c.label.clone());
    }
    let mut product = vec![0.0; n];
    for a in 0..k {
        for b in (a + 1)..k {
            for (i, p) in product.iter_mut().enumerate() {
                *p = live[a].values[i] * live[b].values[i];
            }
            let label = live[a].label.interact(&live[b].label);
            if crate::linalg::is_constant(&product) {
                dropped.push(label.to_string());
            } else {
                data.extend_from_slice(&product);
                labels.push(label);
            }
        }
    }
    let p = labels.len();
    info!(
        "interactions: {k} initial columns, {} products kept, {} columns dropped",
        p - 1 - k,
        dropped.len()
    );
    Ok(ZBlock {
        labels,
        matrix: DMatrix::from_vec(n, p, data),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::{load_csv_reader, SchemaConfig};

    fn ds(csv: &str, extra: &str) -> Dataset {
        let schema = SchemaConfig::from_toml(&format!(
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
{extra}
"#
        ))
        .unwrap();
        load_csv_reader(csv.as_bytes(), &schema, "t").unwrap()
    }

    #[test]
    fn k_minus_one_dummies() {
        let d = ds("wage,female,grp\n1,0,A\n2,1,B\n3,0,C\n4,1,B\n", "");
        let e = encode(&d).unwrap();
        let names: Vec<String> = e.columns.iter().map(|c| c.label.to_string()).collect();
        assert_eq!(names, vec!["grp=B", "grp=C"]);
        assert_eq!(e.columns[0].values, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn dummies_sum_to_one_minus_baseline() {
        let d = ds("wage,female,grp\n1,0,A\n2,1,B\n3,0,C\n4,1,B\n5,1,A\n", "");
        let e = encode(&d).unwrap();
        let base: Vec<f64> = d
            .categorical("grp")
            .unwrap()
            .iter()
            .map(|v| f64::from(u8::from(v == "A")))
            .collect();
        for i in 0..5 {
            let s: f64 = e.columns.iter().map(|c| c.values[i]).sum();
            assert_eq!(s, 1.0 - base[i]);
        }
    }

    #[test]
    fn absent_baseline_is_config_error() {
        let d = ds("wage,female,grp\n1,0,A\n2,1,B\n", "");
        let mut d2 = d.clone();
        d2.schema.columns.iter_mut().find(|c| c.name == "grp").unwrap().baseline = Some("Z".into());
        assert!(matches!(encode(&d2), Err(Error::Config(m)) if m.contains("grp")));
    }

    #[test]
    fn derived_square_rescaled() {
        let extra = r#"
[columns.exper]
kind = "continuous"
role = "moderator"
[columns.veteran]
kind = "binary"
role = "moderator"
[derived.exper_sq]
square_of = "exper"
scale = 0.02
"#;
        let d = ds("wage,female,grp,exper,veteran\n1,0,A,10,1\n2,1,B,20,0\n", extra);
        let e = encode(&d).unwrap();
        let sq = e.columns.iter().find(|c| c.label.to_string() == "exper_sq").unwrap();
        assert!((sq.values[0] - 2.0).abs() < 1e-12);
        let vet = e.columns.iter().find(|c| c.label.to_string() == "veteran").unwrap();
        assert_eq!(vet.values, vec![1.0, 0.0]);
    }

    #[test]
    fn three_columns_three_products() {
        let enc = Encoded {
            n: 4,
            columns: vec![
                EncodedColumn { label: ColumnLabel::variable("a"), values: vec![1.0, 2.0, 3.0, 4.0] },
                EncodedColumn { label: ColumnLabel::variable("b"), values: vec![0.0, 1.0, 0.0, 1.0] },
                EncodedColumn { label: ColumnLabel::variable("c"), values: vec![2.0, 1.0, 1.0, 2.0] },
            ],
        };
        let z = expand_interactions(&enc).unwrap();
        let names: Vec<String> = z.labels.iter().map(|l| l.to_string()).collect();
        assert_eq!(names, vec!["(Intercept)", "a", "b", "c", "a:b", "a:c", "b:c"]);
        assert!(z.dropped.is_empty());
        assert_eq!(z.matrix[(1, 4)], 2.0);
    }

    #[test]
    fn exclusive_dummies_product_dropped() {
        let d = ds("wage,female,grp\n1,0,A\n2,1,B\n3,0,C\n4,1,B\n", "");
        let z = expand_interactions(&encode(&d).unwrap()).unwrap();
        assert_eq!(z.dropped, vec!["grp=B:grp=C"]);
        assert_eq!(z.matrix.ncols(), 3);
    }

    #[test]
    fn label_round_trip() {
        for s in ["(Intercept)", "exper", "race=black", "exper:race=black", "a=x:b=y"] {
            assert_eq!(ColumnLabel::parse(s).unwrap().to_string(), s);
        }
        assert!(ColumnLabel::parse("a=").is_err());
    }
}
