//! Config-driven experiment runner: grids of (model, loss, seed) cells,
//! resumable via a manifest, aggregated into comparison tables.

mod config;
mod runner;
mod table;

use std::path::Path;

use crate::{Error, Result};

pub use config::{Cell, DatasetSource, ExperimentConfig, ModelSettings, TrainSettings, CONFIG_VERSION};
pub use runner::{
    prepare, read_records, report, run_cell, run_cells, run_experiment, CellRecord, CellStatus, ExperimentOutcome,
    Manifest, ManifestEntry, CHECKPOINTS_DIR, MANIFEST_FILE, RECORD_VERSION, RUNS_DIR, TABLE_CSV, TABLE_TEXT,
};
pub use table::{ComparisonTable, Spread, TableRow};

/// Writes via a sibling temp file and rename so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
