//! `config check`.

use std::path::Path;

use anyhow::{bail, Result};

use crate::config::LoadedConfig;

pub fn run(path: &Path) -> Result<()> {
    let cfg = LoadedConfig::load(path)?;
    let problems = cfg.check();
    if problems.is_empty() {
        println!("{}: ok", path.display());
        return Ok(());
    }
    for p in &problems {
        eprintln!("{}: {p}", path.display());
    }
    bail!("{}: {} problem(s)", path.display(), problems.len())
}
