use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::filter::FilterRule;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Outcome,
    Treatment,
    Moderator,
    Metadata,
}

/// Whether the outcome column holds annual or weekly earnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeForm {
    #[default]
    Annual,
    Weekly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    #[serde(skip)]
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    pub role: Role,
}

/// `square_of` column squared, times `scale` (e.g. experience² / 50).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedColumn {
    #[serde(skip)]
    pub name: String,
    pub square_of: String,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Declarative schema: `[columns.<name>]`, `[[filters]]`, `[derived.<name>]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    #[serde(default)]
    pub income_form: IncomeForm,
    #[serde(with = "named_map")]
    pub columns: Vec<ColumnSchema>,
    #[serde(default)]
    pub filters: Vec<FilterRule>,
    #[serde(default, with = "named_derived")]
    pub derived: Vec<DerivedColumn>,
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SchemaConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let count = |r: Role| self.columns.iter().filter(|c| c.role == r).count();
        if count(Role::Outcome) != 1 {
            return Err(Error::Config(format!(
                "exactly one outcome column required, found {}",
                count(Role::Outcome)
            )));
        }
        if count(Role::Treatment) != 1 {
            return Err(Error::Config(format!(
                "exactly one treatment column required, found {}",
                count(Role::Treatment)
            )));
        }
        for c in &self.columns {
            check_identifier(&c.name)?;
            match (c.role, c.kind) {
                (Role::Treatment, k) if k != ColumnKind::Binary => {
                    return Err(Error::Config(format!("treatment `{}` must be binary", c.name)))
                }
                (Role::Outcome, k) if k != ColumnKind::Continuous => {
                    return Err(Error::Config(format!("outcome `{}` must be continuous", c.name)))
                }
                (Role::Moderator, ColumnKind::Categorical) if c.baseline.is_none() => {
                    return Err(Error::Config(format!(
                        "categorical `{}` needs a baseline category",
                        c.name
                    )))
                }
                _ => {}
            }
        }
        for d in &self.derived {
            check_identifier(&d.name)?;
            let src = self.column(&d.square_of).ok_or_else(|| {
                Error::Config(format!("derived `{}` refers to unknown `{}`", d.name, d.square_of))
            })?;
            if src.kind == ColumnKind::Categorical {
                return Err(Error::Config(format!(
                    "derived `{}` squares categorical `{}`",
                    d.name, d.square_of
                )));
            }
            if self.column(&d.name).is_some() {
                return Err(Error::Config(format!("derived `{}` shadows a column", d.name)));
            }
            if !(d.scale.is_finite() && d.scale != 0.0) {
                return Err(Error::Config(format!("derived `{}` has invalid scale", d.name)));
            }
        }
        for f in &self.filters {
            f.validate()?;
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn outcome(&self) -> Result<&ColumnSchema> {
        self.columns
            .iter()
            .find(|c| c.role == Role::Outcome)
            .ok_or_else(|| Error::Config("no outcome column".into()))
    }

    pub fn treatment(&self) -> Result<&ColumnSchema> {
        self.columns
            .iter()
            .find(|c| c.role == Role::Treatment)
            .ok_or_else(|| Error::Config("no treatment column".into()))
    }

    pub fn moderators(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.columns.iter().filter(|c| c.role == Role::Moderator)
    }
}

/// Names and levels become parts of `var=level:var=level` labels.
pub(crate) fn check_identifier(s: &str) -> Result<()> {
    if s.is_empty() || s.contains([':', '=', '\n', '\t']) || s.starts_with('(') {
        return Err(Error::Config(format!(
            "invalid name `{s}`: must be nonempty, not start with '(', and avoid ':', '=', tabs and newlines"
        )));
    }
    Ok(())
}

mod named_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[ColumnSchema], s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<&str, &ColumnSchema> = v.iter().map(|c| (c.name.as_str(), c)).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<ColumnSchema>, D::Error> {
        let m: BTreeMap<String, ColumnSchema> = BTreeMap::deserialize(d)?;
        Ok(m.into_iter()
            .map(|(name, mut c)| {
                c.name = name;
                c
            })
            .collect())
    }
}

mod named_derived {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[DerivedColumn], s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<&str, &DerivedColumn> = v.iter().map(|c| (c.name.as_str(), c)).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<DerivedColumn>, D::Error> {
        let m: BTreeMap<String, DerivedColumn> = BTreeMap::deserialize(d)?;
        Ok(m.into_iter()
            .map(|(name, mut c)| {
                c.name = name;
                c
            })
            .collect())
    }
}
