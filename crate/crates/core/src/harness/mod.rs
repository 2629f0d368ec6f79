//! Scenario presets, experiment runners and CSV emission.

pub mod config;
pub mod doppler;
pub mod engine;
pub mod gdop_map;
pub mod multistatic;
pub mod sweep;

use std::io::Write;

use serde::Serialize;

use crate::Result;

pub use config::{reported_errors, Engine, ErrorOverride, ScenarioConfig, PRESETS};
pub use doppler::{run_doppler, DopplerRecord, DopplerResult};
pub use engine::{MeasurementEngine, SignalChain};
pub use gdop_map::{run_gdop_map, GdopCell, GridSpec};
pub use multistatic::{run_multistatic, run_multistatic_with, MultistaticResult, MultistaticRow, MultistaticSummary, Weighting};
pub use sweep::{run_iso_range_sweep, SweepResult, SweepRow, SweepSummary};

/// Serialize records as CSV with a header row. Missing values are empty cells.
pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
