use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    chronological_split, generate_drift, load_csv, CsvSchema, DayIndexedDataset, DriftConfig, OnError,
    PrepOptions, SyntheticData,
};
use crate::losses::{LossSpec, LossVariant};
use crate::models::{Interaction, ModelSpec};
use crate::trainer::{EvalMetric, Reduction, TrainConfig};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Where an experiment's records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        #[serde(default)]
        drift: DriftConfig,
        /// Regenerate the stream with each run seed instead of `drift.seed`.
        #[serde(default = "yes")]
        seed_per_run: bool,
    },
    Csv {
        /// Relative paths resolve against the config file's directory.
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
        #[serde(default)]
        on_error: OnError,
    },
}

fn yes() -> bool {
    true
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic {
            drift: DriftConfig::default(),
            seed_per_run: true,
        }
    }
}

impl DatasetSource {
    /// Key identifying which dataset a run with `seed` trains on.
    pub fn dataset_seed(&self, seed: u64) -> Option<u64> {
        match self {
            DatasetSource::Synthetic {
                seed_per_run: true, ..
            } => Some(seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub embedding_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub cross_depth: usize,
    pub fm_first_order: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let spec = ModelSpec::new(Interaction::MlpOnly, 1);
        Self {
            embedding_dim: spec.embedding_dim,
            hidden_widths: spec.hidden_widths,
            cross_depth: spec.cross_depth,
            fm_first_order: spec.fm_first_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub eval_metric: EvalMetric,
    pub reduction: Reduction,
    /// Scale of the linear schedule.
    pub alpha: f64,
    pub weight_multiplier: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::new(
            ModelSpec::new(Interaction::MlpOnly, 1),
            LossSpec::new(LossVariant::Plain, 1),
            0,
        );
        Self {
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            learning_rate: c.learning_rate,
            early_stop_patience: c.early_stop_patience,
            eval_metric: c.eval_metric,
            reduction: c.reduction,
            alpha: c.loss.alpha,
            weight_multiplier: c.weight_multiplier,
        }
    }
}

/// One (model, loss, seed) training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub model: Interaction,
    pub loss: LossVariant,
    pub seed: u64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("{}-{}-s{}", self.model.model_name(), self.loss.name(), self.seed)
    }
}

/// Experiment file, TOML.
///
/// ```toml
/// version = 1
/// models = ["dnn"]
/// losses = ["plain", "tif_linear", "tif_anti"]
/// seeds = [1, 2, 3, 4, 5]
///
/// [dataset]
/// kind = "synthetic"          # or "csv" with `path`, `[dataset.schema]`, `on_error`
/// [dataset.drift]
/// drift_rate = 0.5
///
/// [train]
/// batch_size = 256
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub dataset: DatasetSource,
    /// Defaults to keeping every value without time features for synthetic
    /// data, and to [`PrepOptions::default`] for CSV.
    #[serde(default)]
    pub preprocess: Option<PrepOptions>,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default = "default_models")]
    pub models: Vec<Interaction>,
    #[serde(default = "default_losses")]
    pub losses: Vec<LossVariant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Output directory; relative paths resolve against the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_models() -> Vec<Interaction> {
    vec![Interaction::MlpOnly]
}

fn default_losses() -> Vec<LossVariant> {
    vec![LossVariant::Plain, LossVariant::Linear, LossVariant::Anti]
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

fn default_jobs() -> usize {
    1
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            dataset: DatasetSource::default(),
            preprocess: None,
            model: ModelSettings::default(),
            train: TrainSettings::default(),
            models: default_models(),
            losses: default_losses(),
            seeds: default_seeds(),
            jobs: default_jobs(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file. Relative paths inside it are made
    /// relative to the file's directory. Unreadable files are usage errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| Error::config(format!("{}: {}", path.display(), strip_prefix(&e))))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetSource::Csv { path, .. } = &mut config.dataset {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(out) = &mut config.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.models.is_empty() || self.losses.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("models, losses and seeds must be non-empty"));
        }
        if !self.losses.contains(&LossVariant::Plain) {
            return Err(Error::config("losses must include the plain baseline"));
        }
        let unique = |n: usize, set: usize, what: &str| {
            if n != set {
                Err(Error::config(format!("duplicate entries in {what}")))
            } else {
                Ok(())
            }
        };
        unique(self.models.len(), self.models.iter().collect::<BTreeSet<_>>().len(), "models")?;
        unique(self.losses.len(), self.losses.iter().collect::<BTreeSet<_>>().len(), "losses")?;
        unique(self.seeds.len(), self.seeds.iter().collect::<BTreeSet<_>>().len(), "seeds")?;
        if self.jobs < 1 {
            return Err(Error::config("jobs must be at least 1"));
        }
        if let DatasetSource::Synthetic { drift, .. } = &self.dataset {
            drift.validate()?;
        }
        self.prep_options().validate()?;
        for &m in &self.models {
            self.train_config(
                Cell {
                    model: m,
                    loss: LossVariant::Plain,
                    seed: 0,
                },
                2,
                1,
            )
            .validate()?;
        }
        Ok(())
    }

    pub fn prep_options(&self) -> PrepOptions {
        match (&self.preprocess, &self.dataset) {
            (Some(p), _) => p.clone(),
            (None, DatasetSource::Synthetic { .. }) => SyntheticData::prep_options(),
            (None, DatasetSource::Csv { .. }) => PrepOptions::default(),
        }
    }

    /// Every cell in model, loss, seed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &model in &self.models {
            for &loss in &self.losses {
                for &seed in &self.seeds {
                    cells.push(Cell { model, loss, seed });
                }
            }
        }
        cells
    }

    pub fn train_config(&self, cell: Cell, field_count: usize, n_days: u32) -> TrainConfig {
        let t = &self.train;
        let mut model = ModelSpec::new(cell.model, field_count);
        model.embedding_dim = self.model.embedding_dim;
        model.hidden_widths = self.model.hidden_widths.clone();
        model.cross_depth = self.model.cross_depth;
        model.fm_first_order = self.model.fm_first_order;
        TrainConfig {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            learning_rate: t.learning_rate,
            early_stop_patience: t.early_stop_patience,
            seed: cell.seed,
            loss: LossSpec::new(cell.loss, n_days).with_alpha(t.alpha),
            model,
            eval_metric: t.eval_metric,
            reduction: t.reduction,
            weight_multiplier: t.weight_multiplier,
        }
    }

    /// Hash over everything that determines a cell's result.
    pub fn cell_hash(&self, cell: Cell) -> String {
        let mut source = self.dataset.clone();
        if let (DatasetSource::Synthetic { drift, .. }, Some(seed)) = (&mut source, self.dataset.dataset_seed(cell.seed)) {
            drift.seed = seed;
        }
        let key = serde_json::json!({
            "dataset": source,
            "preprocess": self.prep_options(),
            "model": self.model,
            "train": self.train,
            "cell": cell,
        });
        crate::trainer::short_hash(key.to_string().as_bytes())
    }

    /// Loads or generates the dataset a run with `seed` trains on.
    pub fn load_dataset(&self, seed: u64) -> Result<DayIndexedDataset> {
        let prep = self.prep_options();
        match &self.dataset {
            DatasetSource::Synthetic { drift, .. } => {
                let mut drift = drift.clone();
                if let Some(s) = self.dataset.dataset_seed(seed) {
                    drift.seed = s;
                }
                chronological_split(&generate_drift(&drift)?.records, &prep)
            }
            DatasetSource::Csv {
                path,
                schema,
                on_error,
            } => {
                let report = load_csv(path, schema, *on_error)?;
                chronological_split(&report.records, &prep)
            }
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
