//! On-disk documents. Every writer produces canonical bytes: pretty JSON
//! with a trailing newline, map keys in sorted order.

pub mod bundle;
pub mod coco;
pub mod curve;
pub mod grid;
pub mod metrics;
pub mod policy;
pub mod pseudo;
pub mod ratios;
pub mod records;

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("{}: invalid document", path.display()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}
