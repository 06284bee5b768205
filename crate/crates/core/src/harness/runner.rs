use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::{Cell, ExperimentConfig};
use super::table::ComparisonTable;
use super::write_atomic;
use crate::data::DayIndexedDataset;
use crate::metrics::MetricsReport;
use crate::par;
use crate::trainer::{evaluate, train, RunRecord};
use crate::{Error, Result};

pub const RECORD_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUNS_DIR: &str = "runs";
pub const CHECKPOINTS_DIR: &str = "checkpoints";
pub const TABLE_TEXT: &str = "table.txt";
pub const TABLE_CSV: &str = "table.csv";

/// Everything one finished cell produced; stored as `runs/<cell id>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub version: u32,
    pub cell: Cell,
    pub cell_hash: String,
    pub n_days: u32,
    pub run: RunRecord,
    pub val: MetricsReport,
    pub test: MetricsReport,
    /// Relative to the output directory.
    pub checkpoint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub hash: String,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Completed and failed cells keyed by cell id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub cells: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::data(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self {
                version: RECORD_VERSION,
                cells: BTreeMap::new(),
            }),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        write_json(&out_dir.join(MANIFEST_FILE), self)
    }

    /// True when `cell` finished under the same settings and its record is on disk.
    pub fn is_done(&self, out_dir: &Path, cell: Cell, hash: &str) -> bool {
        self.cells.get(&cell.id()).is_some_and(|e| {
            e.status == CellStatus::Done
                && e.hash == hash
                && e.record.as_ref().is_some_and(|r| out_dir.join(r).is_file())
        })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub table: ComparisonTable,
    pub trained: Vec<String>,
    pub skipped: Vec<String>,
    /// `(cell id, error message)`.
    pub failures: Vec<(String, String)>,
}

/// Trains one cell on `dataset` and writes its checkpoint and record.
pub fn run_cell(
    config: &ExperimentConfig,
    cell: Cell,
    dataset: &DayIndexedDataset,
    out_dir: &Path,
) -> Result<CellRecord> {
    let train_config = config.train_config(cell, dataset.field_count(), dataset.n_days);
    let (model, run) = train(dataset, &train_config)?;
    let val = evaluate(&model, dataset.val())?;
    let test = evaluate(&model, dataset.test())?;
    let checkpoint = format!("{CHECKPOINTS_DIR}/{}.json", cell.id());
    model.save(&out_dir.join(&checkpoint))?;
    let record = CellRecord {
        version: RECORD_VERSION,
        cell,
        cell_hash: config.cell_hash(cell),
        n_days: dataset.n_days,
        run,
        val,
        test,
        checkpoint,
    };
    write_json(&out_dir.join(record_path(cell)), &record)?;
    Ok(record)
}

fn record_path(cell: Cell) -> String {
    format!("{RUNS_DIR}/{}.json", cell.id())
}

/// Runs every pending cell of `cells` (skipping ones the manifest marks
/// done), up to `config.jobs` at a time. Cell failures are recorded and do
/// not stop the remaining cells.
pub fn run_cells(config: &ExperimentConfig, cells: &[Cell], out_dir: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    let mut manifest = Manifest::load(out_dir)?;
    manifest.version = RECORD_VERSION;
    let (done, pending): (Vec<Cell>, Vec<Cell>) = cells
        .iter()
        .partition(|&&c| manifest.is_done(out_dir, c, &config.cell_hash(c)));

    let keys: BTreeSet<Option<u64>> = pending.iter().map(|c| config.dataset.dataset_seed(c.seed)).collect();
    let keys: Vec<Option<u64>> = keys.into_iter().collect();
    let loaded = par::map_with_jobs(config.jobs, &keys, |k| config.load_dataset(k.unwrap_or(0)));
    let mut datasets = BTreeMap::new();
    for (k, ds) in keys.into_iter().zip(loaded) {
        datasets.insert(k, ds?);
    }

    let manifest = Mutex::new(manifest);
    let results = par::map_with_jobs(config.jobs, &pending, |&cell| {
        let ds = &datasets[&config.dataset.dataset_seed(cell.seed)];
        let result = run_cell(config, cell, ds, out_dir);
        let entry = match &result {
            Ok(_) => ManifestEntry {
                hash: config.cell_hash(cell),
                status: CellStatus::Done,
                record: Some(record_path(cell)),
                error: None,
            },
            Err(e) => ManifestEntry {
                hash: config.cell_hash(cell),
                status: CellStatus::Failed,
                record: None,
                error: Some(e.to_string()),
            },
        };
        let mut m = manifest.lock().unwrap_or_else(|p| p.into_inner());
        m.cells.insert(cell.id(), entry);
        m.save(out_dir).map(|()| result.map(|_| ()))
    });

    let mut failures = Vec::new();
    let mut trained = Vec::new();
    for (cell, r) in pending.iter().zip(results) {
        match r? {
            Ok(()) => trained.push(cell.id()),
            Err(e) => failures.push((cell.id(), e.to_string())),
        }
    }

    let finished: BTreeSet<Cell> = cells
        .iter()
        .copied()
        .filter(|c| !failures.iter().any(|(id, _)| *id == c.id()))
        .collect();
    let records = read_records(out_dir)?
        .into_iter()
        .filter(|(_, r)| finished.contains(&r.cell))
        .collect::<Vec<_>>();
    let table = write_tables(&records, out_dir)?;
    Ok(ExperimentOutcome {
        table,
        trained,
        skipped: done.iter().map(Cell::id).collect(),
        failures,
    })
}

/// Runs the full (model × loss × seed) grid and writes the comparison tables.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    run_cells(config, &config.cells(), out_dir)
}

/// Every parseable run record in `out_dir/runs`, sorted by file name.
pub fn read_records(out_dir: &Path) -> Result<Vec<(String, CellRecord)>> {
    let dir = out_dir.join(RUNS_DIR);
    let entries = match std::fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let record: CellRecord =
                serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", p.display())))?;
            let name = format!("{RUNS_DIR}/{}", p.file_name().unwrap_or_default().to_string_lossy());
            Ok((name, record))
        })
        .collect()
}

fn write_tables(records: &[(String, CellRecord)], out_dir: &Path) -> Result<ComparisonTable> {
    let table = ComparisonTable::from_records(records)?;
    write_atomic(&out_dir.join(TABLE_TEXT), table.to_text().as_bytes())?;
    write_atomic(&out_dir.join(TABLE_CSV), table.to_csv().as_bytes())?;
    Ok(table)
}

/// Re-renders the tables from stored run records, optionally for one seed.
pub fn report(out_dir: &Path, seed: Option<u64>) -> Result<ComparisonTable> {
    let records: Vec<_> = read_records(out_dir)?
        .into_iter()
        .filter(|(_, r)| seed.is_none_or(|s| r.cell.seed == s))
        .collect();
    if records.is_empty() {
        return Err(Error::data(format!("no run records found in {}", out_dir.join(RUNS_DIR).display())));
    }
    write_tables(&records, out_dir)
}

/// Loads the configured dataset and writes split and vocabulary artifacts.
pub fn prepare(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<DayIndexedDataset> {
    let ds = config.load_dataset(seed)?;
    ds.write_artifacts(out_dir)?;
    Ok(ds)
}
