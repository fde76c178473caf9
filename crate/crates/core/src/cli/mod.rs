//! Batch front-end: configuration files, sweeps, CSV and manifest output.

mod config;
mod csv;
mod run;

pub use config::{
    apply_overrides, from_table, parse_config, scale_family, InitialState, RunConfig, Sweep, SweepPoint,
    DEFAULT_DT_PS, DEFAULT_T_MAX_PS,
};
pub use csv::{emit_csv, header, read_csv, write_csv};
pub use run::{csv_name, run, CacheUse, MethodOutcome, MethodSummary, PointOutcome, RunReport, MANIFEST_NAME};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads a config file and applies `key=value` overrides before validation.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Config(vec![format!("{}: {e}", path.display())])
    })?;
    apply_overrides(&mut table, overrides)?;
    from_table(&table)
}

#[cfg(test)]
mod tests;
