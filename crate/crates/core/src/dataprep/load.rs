use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use log::info;

use super::schema::{check_identifier, ColumnKind, SchemaConfig};
use super::{ColumnData, Dataset};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "N/A" | "." | "NaN")
}

pub fn load_csv(path: &Path, schema: &SchemaConfig) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_reader(file, schema, &path.display().to_string())
}

/// Reads a headered UTF-8 CSV into typed columns. Rows with a missing cell
/// in any schema column are dropped and counted per column.
pub fn load_csv_reader<R: Read>(reader: R, schema: &SchemaConfig, provenance: &str) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{provenance}: cannot read header: {e}")))?
        .clone();
    let mut index = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        match headers.iter().position(|h| h.trim() == col.name) {
            Some(i) => index.push(i),
            None => {
                return Err(Error::Schema(format!(
                    "{provenance}: declared column `{}` missing from header",
                    col.name
                )))
            }
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); schema.columns.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{provenance}: row {}: {e}", r + 1)))?;
        for (k, &i) in index.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            raw[k].push(if is_missing(cell) {
                None
            } else {
                Some(cell.trim().to_string())
            });
        }
    }
    let n_raw = raw.first().map_or(0, |c| c.len());

    let mut missingness = BTreeMap::new();
    let mut complete = vec![true; n_raw];
    for (k, col) in schema.columns.iter().enumerate() {
        let miss = raw[k].iter().filter(|c| c.is_none()).count();
        missingness.insert(col.name.clone(), miss);
        for (i, c) in raw[k].iter().enumerate() {
            if c.is_none() {
                complete[i] = false;
            }
        }
    }
    let keep: Vec<usize> = (0..n_raw).filter(|&i| complete[i]).collect();
    let dropped = n_raw - keep.len();
    if dropped > 0 {
        info!("{provenance}: dropped {dropped} rows with missing cells ({missingness:?})");
    }

    let mut bad: Vec<(usize, String)> = Vec::new();
    let mut columns = BTreeMap::new();
    for (k, col) in schema.columns.iter().enumerate() {
        let cells = keep.iter().map(|&i| (i, raw[k][i].as_deref().unwrap()));
        let data = match col.kind {
            ColumnKind::Categorical => {
                let vals: Vec<String> = cells.map(|(_, s)| s.to_string()).collect();
                for v in vals.iter().collect::<std::collections::BTreeSet<_>>() {
                    if check_identifier(v).is_err() {
                        return Err(Error::Data(format!(
                            "{provenance}: level `{v}` of `{}` contains a reserved character",
                            col.name
                        )));
                    }
                }
                ColumnData::Categorical(vals)
            }
            ColumnKind::Continuous | ColumnKind::Binary => {
                let mut vals = Vec::with_capacity(keep.len());
                for (i, s) in cells {
                    match s.parse::<f64>() {
                        Ok(v) if v.is_finite()
                            && (col.kind == ColumnKind::Continuous || v == 0.0 || v == 1.0) =>
                        {
                            vals.push(v)
                        }
                        _ => {
                            bad.push((i + 1, col.name.clone()));
                            vals.push(f64::NAN);
                        }
                    }
                }
                ColumnData::Numeric(vals)
            }
        };
        columns.insert(col.name.clone(), data);
    }
    if !bad.is_empty() {
        bad.sort();
        let shown: Vec<String> = bad
            .iter()
            .take(20)
            .map(|(r, c)| format!("row {r} column `{c}`"))
            .collect();
        return Err(Error::Parse {
            message: format!(
                "{provenance}: {} unparseable cell(s): {}{}",
                bad.len(),
                shown.join(", "),
                if bad.len() > 20 { ", ..." } else { "" }
            ),
            cells: bad,
        });
    }
    if keep.is_empty() {
        return Err(Error::Data(format!("{provenance}: no complete rows")));
    }
    Ok(Dataset {
        schema: schema.clone(),
        columns,
        provenance: provenance.to_string(),
        dropped_rows: dropped,
        missingness,
        filter_drops: Vec::new(),
    })
}
