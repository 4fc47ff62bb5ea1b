use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hetgap::bootstrap::BootstrapConfig;
use hetgap::dataprep::SchemaConfig;
use hetgap::decompose::DecomposeConfig;
use hetgap::dsinfer::DsConfig;
use hetgap::report::SvgStyle;
use hetgap::synth::MonteCarloSpec;
use hetgap::{Error, Result};
use serde::{Deserialize, Serialize};

/// Subgroup runs: every row must match exactly one group's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subgroups {
    pub column: String,
    pub groups: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Quantile levels; percentiles 1..99 when absent.
    pub grid: Option<Vec<f64>>,
    /// Variables that get a sorted interval plot.
    pub group_by: Vec<String>,
    pub style: SvgStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV input, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Results directory, relative to the config file; `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<SchemaConfig>,
    #[serde(default)]
    pub model: DsConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroups: Option<Subgroups>,
    #[serde(default)]
    pub decompose: DecomposeConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<MonteCarloSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.model.penalty.c;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("model.penalty.c must be positive, got {c}")));
        }
        if let Some(schema) = &self.schema {
            schema.validate()?;
        }
        self.bootstrap.validate()?;
        if let Some(g) = &self.report.grid {
            if g.is_empty() || g.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
                return Err(Error::Config("report.grid levels must lie in (0, 1)".into()));
            }
        }
        if let Some(s) = &self.subgroups {
            if s.groups.is_empty() {
                return Err(Error::Config("subgroups.groups is empty".into()));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<&SchemaConfig> {
        self.schema
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [schema] section".into()))
    }

    /// The config as written to the run directory and hashed: output
    /// location removed so identical analyses hash identically wherever
    /// they are written.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        toml::to_string(&c).expect("config serializes")
    }
}
