use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use hetgap::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";
pub const LOG: &str = "run.log";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub input_sha256: Option<String>,
    /// Every file under the run directory except the manifest and log.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(sha256_hex(&bytes))
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let io = |e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    let mut entries: Vec<_> = fs::read_dir(dir).map_err(io)?.collect::<std::io::Result<_>>().map_err(io)?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            walk(root, &path, out)?;
            continue;
        }
        let rel = path.strip_prefix(root).expect("under root");
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if key == MANIFEST || key == LOG {
            continue;
        }
        out.insert(key, sha256_file(&path)?);
    }
    Ok(())
}

pub fn write_manifest(out_dir: &Path, config: &str, input: Option<&Path>) -> Result<()> {
    let mut outputs = BTreeMap::new();
    walk(out_dir, out_dir, &mut outputs)?;
    let input_sha256 = match input {
        Some(p) if p.exists() => Some(sha256_file(p)?),
        _ => None,
    };
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(config.as_bytes()),
        input_sha256,
        outputs,
    };
    let path = out_dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    fs::write(&path, json).map_err(|e| Error::Io { path, source: e })
}
