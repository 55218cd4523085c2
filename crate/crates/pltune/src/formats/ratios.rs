//! Label-ratio tables: `{"<class_id>": {"x": .., "mode": ..}}`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pltune_core::model::{LabelRatio, LabelRatioTable, RatioMode};
use pltune_core::ClassId;

use super::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioEntry {
    pub x: f64,
    pub mode: String,
}

pub type RatioDocument = BTreeMap<u32, RatioEntry>;

pub fn parse_mode(s: &str) -> Result<RatioMode> {
    Ok(match s {
        "exact" => RatioMode::Exact,
        "image_count_estimate" => RatioMode::ImageCountEstimate,
        _ => bail!("unknown ratio mode {s:?}"),
    })
}

pub fn to_document(table: &LabelRatioTable) -> RatioDocument {
    table
        .iter()
        .map(|(c, r)| {
            (
                c.0,
                RatioEntry {
                    x: r.x(),
                    mode: r.mode.as_str().to_string(),
                },
            )
        })
        .collect()
}

pub fn from_document(doc: &RatioDocument) -> Result<LabelRatioTable> {
    doc.iter()
        .map(|(&c, e)| {
            let mode = parse_mode(&e.mode).with_context(|| format!("{c}.mode"))?;
            let r = LabelRatio::new(e.x, mode).with_context(|| format!("{c}.x"))?;
            Ok((ClassId(c), r))
        })
        .collect()
}

pub fn load_ratios(path: &Path) -> Result<LabelRatioTable> {
    let doc: RatioDocument = read_json(path)?;
    from_document(&doc).with_context(|| path.display().to_string())
}
