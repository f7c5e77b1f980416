//! Serialization: dense fields as row-major little-endian `f64` with a JSON
//! sidecar describing the domain; sparse integer fields as `[[i, j, value], ...]`.

use super::domain::Domain;
use super::field::Field;
use super::sparse::SparseIntField;
use crate::error::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

/// Path of the JSON sidecar for a binary field file (`g.bin` -> `g.bin.json`).
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn field_to_bytes(f: &Field<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_bytes(domain: Domain, bytes: &[u8]) -> Result<Field<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidArgument("binary length not a multiple of 8".into()));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::from_values(domain, values)
}

/// Write `path` (binary) and `path.json` (domain sidecar).
pub fn write_field(f: &Field<f64>, path: &Path) -> Result<()> {
    fs::write(path, field_to_bytes(f))?;
    fs::write(sidecar_path(path), serde_json::to_vec(&f.domain())?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field<f64>> {
    let domain: Domain = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    field_from_bytes(domain, &fs::read(path)?)
}

pub fn sparse_to_json(v: &SparseIntField) -> serde_json::Value {
    serde_json::Value::Array(
        v.entries()
            .map(|((i, j), x)| serde_json::json!([i, j, x]))
            .collect(),
    )
}

pub fn sparse_from_json(domain: Domain, value: &serde_json::Value) -> Result<SparseIntField> {
    let bad = || Error::InvalidArgument("expected a list of [i, j, value] triples".into());
    let arr = value.as_array().ok_or_else(bad)?;
    let mut entries = Vec::with_capacity(arr.len());
    for item in arr {
        let t = item.as_array().ok_or_else(bad)?;
        if t.len() != 3 {
            return Err(bad());
        }
        let g = |k: usize| t[k].as_i64().ok_or_else(bad);
        entries.push(((g(0)?, g(1)?), g(2)?));
    }
    SparseIntField::from_entries(domain, entries)
}
