//! Multi-seed experiments: orchestration, aggregation and reports.

pub mod report;
pub mod run;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::games::GameConfig;

pub use report::{aggregate, parse_report_csv, render_report, AggregateReport, RegimeSummary, ReportFormat, SeedFailure, Stat};
pub use run::{child_seed, run_experiment, run_seed, run_sweep, splitmix64, ExperimentSpec, SweepOptions};

/// Reads a `key = value` config file, then applies `overrides` in order.
pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<GameConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = GameConfig::parse(&text)?;
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
