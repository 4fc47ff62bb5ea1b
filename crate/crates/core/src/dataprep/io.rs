//! On-disk model frame: a directory holding
//!
//! * `design.hdgf`: magic `HDGF`, format version (u32 LE), n, p1, p2 (u64
//!   LE), then little-endian f64 columns in column-major order: y, d, the
//!   p1 moderator columns, the p2 control columns;
//! * `labels.txt`: p1 moderator labels then p2 control labels, one per line;
//! * `dims.json`: the dimension report.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::encode::ColumnLabel;
use super::frame::{DimensionReport, ModelFrame};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HDGF";
pub const FORMAT_VERSION: u32 = 1;
pub const DESIGN_FILE: &str = "design.hdgf";
pub const LABELS_FILE: &str = "labels.txt";
pub const DIMS_FILE: &str = "dims.json";

pub fn write_frame(dir: &Path, frame: &ModelFrame) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(DESIGN_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(&path, e));
    put(MAGIC)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    for dim in [frame.n(), frame.p1(), frame.p2()] {
        put(&(dim as u64).to_le_bytes())?;
    }
    for v in frame
        .y
        .iter()
        .chain(&frame.d)
        .chain(frame.x.as_slice())
        .chain(frame.z.as_slice())
    {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(LABELS_FILE);
    let mut text = String::new();
    for l in frame.x_labels.iter().chain(&frame.z_labels) {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(DIMS_FILE);
    let json = serde_json::to_string_pretty(&frame.report).expect("report serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn read_frame(dir: &Path) -> Result<ModelFrame> {
    let path = dir.join(DESIGN_FILE);
    let mut bytes = Vec::new();
    fs::File::open(&path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(&path, e))?;
    let corrupt = |what: &str| Error::Data(format!("{}: {what}", path.display()));
    if bytes.len() < 32 || &bytes[..4] != MAGIC {
        return Err(corrupt("not a design file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format version {version}")));
    }
    let dim = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
    let (n, p1, p2) = (dim(0), dim(1), dim(2));
    let total = n
        .checked_mul(2 + p1 + p2)
        .ok_or_else(|| corrupt("dimensions overflow"))?;
    if bytes.len() != 32 + 8 * total {
        return Err(corrupt("length does not match header dimensions"));
    }
    let values: Vec<f64> = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let y = values[..n].to_vec();
    let d = values[n..2 * n].to_vec();
    let x = DMatrix::from_column_slice(n, p1, &values[2 * n..(2 + p1) * n]);
    let z = DMatrix::from_column_slice(n, p2, &values[(2 + p1) * n..]);

    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let labels = text
        .lines()
        .map(ColumnLabel::parse)
        .collect::<Result<Vec<_>>>()?;
    if labels.len() != p1 + p2 {
        return Err(Error::Data(format!(
            "{}: {} labels for {} columns",
            path.display(),
            labels.len(),
            p1 + p2
        )));
    }
    let z_labels = labels[p1..].to_vec();
    let x_labels = labels[..p1].to_vec();

    let path = dir.join(DIMS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let report: DimensionReport = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;

    let mut frame = ModelFrame::new(y, d, x, z, x_labels, z_labels)?;
    frame.report = report;
    Ok(frame)
}
