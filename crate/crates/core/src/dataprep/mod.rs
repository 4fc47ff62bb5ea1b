//! Tabular ingestion and design construction.
//!
//! Raw records go through [`load_csv`] (typed columns, listwise deletion of
//! incomplete rows), [`apply_filters`] (sample-composition rules),
//! [`encode`] (baseline dummy coding plus derived terms) and
//! [`expand_interactions`] (all pairwise products), ending in a
//! [`ModelFrame`] via [`build_model_frame`].

mod encode;
mod filter;
mod frame;
mod io;
mod load;
mod schema;

pub use encode::{encode, expand_interactions, ColumnLabel, EncodedColumn, Encoded, LabelPart, ZBlock};
pub use filter::{apply_filters, CompareOp, FilterDrop, FilterKind, FilterRule};
pub use frame::{build_model_frame, DimensionReport, ModelFrame};
pub use io::{read_frame, write_frame, DESIGN_FILE, DIMS_FILE, LABELS_FILE, MAGIC, FORMAT_VERSION};
pub use load::{load_csv, load_csv_reader};
pub use schema::{ColumnKind, ColumnSchema, DerivedColumn, IncomeForm, Role, SchemaConfig};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// Typed, complete records conforming to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: SchemaConfig,
    pub columns: BTreeMap<String, ColumnData>,
    pub provenance: String,
    /// Rows removed so far (missing cells, filters), for reporting.
    pub dropped_rows: usize,
    /// Missing-cell counts per schema column at load time.
    pub missingness: BTreeMap<String, usize>,
    pub filter_drops: Vec<FilterDrop>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.columns.values().next().map_or(0, |c| c.len())
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.columns.get(name) {
            Some(ColumnData::Numeric(v)) => Ok(v),
            Some(ColumnData::Categorical(_)) => {
                Err(Error::Schema(format!("column `{name}` is categorical, expected numeric")))
            }
            None => Err(Error::Schema(format!("unknown column `{name}`"))),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&[String]> {
        match self.columns.get(name) {
            Some(ColumnData::Categorical(v)) => Ok(v),
            Some(ColumnData::Numeric(_)) => {
                Err(Error::Schema(format!("column `{name}` is numeric, expected categorical")))
            }
            None => Err(Error::Schema(format!("unknown column `{name}`"))),
        }
    }

    /// Weekly earnings: the outcome column itself, or annual earnings / 52.
    pub fn weekly_wage(&self) -> Result<Vec<f64>> {
        let outcome = self.schema.outcome()?;
        let v = self.numeric(&outcome.name)?;
        Ok(match self.schema.income_form {
            IncomeForm::Weekly => v.to_vec(),
            IncomeForm::Annual => v.iter().map(|a| a / 52.0).collect(),
        })
    }

    pub fn annual_income(&self) -> Result<Vec<f64>> {
        let outcome = self.schema.outcome()?;
        let v = self.numeric(&outcome.name)?;
        Ok(match self.schema.income_form {
            IncomeForm::Weekly => v.iter().map(|w| w * 52.0).collect(),
            IncomeForm::Annual => v.to_vec(),
        })
    }

    /// Keeps the given rows (in order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self
                .columns
                .iter()
                .map(|(k, c)| (k.clone(), c.select(rows)))
                .collect(),
            provenance: self.provenance.clone(),
            dropped_rows: self.dropped_rows + (self.n_rows() - rows.len()),
            missingness: self.missingness.clone(),
            filter_drops: self.filter_drops.clone(),
        }
    }

    /// Splits rows by the value of a column; `groups` maps a group name to
    /// the values it claims. Every row must land in exactly one group.
    pub fn split_by(
        &self,
        column: &str,
        groups: &[(String, Vec<String>)],
    ) -> Result<Vec<(String, Dataset)>> {
        let values: Vec<String> = match self.columns.get(column) {
            Some(ColumnData::Categorical(v)) => v.clone(),
            Some(ColumnData::Numeric(v)) => v.iter().map(|x| format_number(*x)).collect(),
            None => return Err(Error::Config(format!("subgroup column `{column}` not in schema"))),
        };
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        for (i, v) in values.iter().enumerate() {
            let hits: Vec<usize> = groups
                .iter()
                .enumerate()
                .filter(|(_, (_, vals))| vals.iter().any(|x| x == v))
                .map(|(g, _)| g)
                .collect();
            match hits.as_slice() {
                [g] => rows[*g].push(i),
                [] => {
                    return Err(Error::Config(format!(
                        "subgroups do not partition the data: value `{v}` of `{column}` (row {}) is in no group",
                        i + 1
                    )))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "subgroups do not partition the data: value `{v}` of `{column}` is in several groups"
                    )))
                }
            }
        }
        Ok(groups
            .iter()
            .zip(rows)
            .map(|((name, _), r)| (name.clone(), self.select_rows(&r)))
            .collect())
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}
