//! Mini-batch training with temporal importance weights and early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DayIndexedDataset, Sample};
use crate::losses::{tif_weight, LossSpec};
use crate::metrics::MetricsReport;
use crate::models::{Gradients, Model, ModelSpec};
use crate::numkernel::{adam_step, adam_step_rows, AdamConfig, AdamState};
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    Auc,
    Logloss,
}

impl EvalMetric {
    fn value(self, report: &MetricsReport) -> f64 {
        match self {
            EvalMetric::Auc => report.auc,
            EvalMetric::Logloss => report.logloss,
        }
    }

    fn improves(self, candidate: f64, best: f64) -> bool {
        match self {
            EvalMetric::Auc => candidate > best,
            EvalMetric::Logloss => candidate < best,
        }
    }
}

/// How per-sample weighted losses are reduced over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Divide by the batch size.
    #[default]
    Mean,
    /// Divide by the sum of the batch's weights.
    WeightSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub loss: LossSpec,
    pub model: ModelSpec,
    pub eval_metric: EvalMetric,
    pub reduction: Reduction,
    /// Extra constant applied on top of every temporal weight.
    pub weight_multiplier: Option<f64>,
}

impl TrainConfig {
    /// Desk-scale defaults: batch 256, Adam at 1e-3, patience 2, 20 epochs.
    pub fn new(model: ModelSpec, loss: LossSpec, seed: u64) -> Self {
        Self {
            batch_size: 256,
            max_epochs: 20,
            learning_rate: 1e-3,
            early_stop_patience: 2,
            seed,
            loss,
            model,
            eval_metric: EvalMetric::Auc,
            reduction: Reduction::Mean,
            weight_multiplier: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.early_stop_patience < 1 {
            return Err(Error::config("early_stop_patience must be at least 1"));
        }
        if self.max_epochs < 1 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if let Some(m) = self.weight_multiplier {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::config("weight_multiplier must be positive"));
            }
        }
        self.loss.validate()?;
        self.model.validate()
    }

    /// First 16 hex digits of SHA-256 over the config's JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        short_hash(json.as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean weighted training loss over the epoch.
    pub train_loss: f64,
    pub val_logloss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// Copy with wall time zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Adam state for every parameter group of a model.
#[derive(Debug, Clone)]
pub struct Optimizer {
    embedding: AdamState,
    first_order: Option<AdamState>,
    dense: Vec<AdamState>,
}

impl Optimizer {
    pub fn new(model: &mut Model, config: AdamConfig) -> Self {
        let (emb, first) = model.embedding_params_mut();
        let embedding = AdamState::new(emb.len(), config);
        let first_order = first.map(|f| AdamState::new(f.len(), config));
        let dense = model
            .dense_params_mut()
            .iter()
            .map(|p| AdamState::new(p.len(), config))
            .collect();
        Self {
            embedding,
            first_order,
            dense,
        }
    }

    /// Dense Adam for MLP/cross parameters, row-wise Adam for the embedding
    /// rows this batch touched.
    pub fn step(&mut self, model: &mut Model, grads: &mut Gradients) -> Result<()> {
        let dim = grads.embedding.dim();
        let rows = grads.embedding.touched_rows().to_vec();
        let (emb, first) = model.embedding_params_mut();
        adam_step_rows(emb, grads.embedding.values(), &rows, dim, &mut self.embedding)?;
        if let (Some(params), Some(g), Some(state)) =
            (first, grads.first_order.as_mut(), self.first_order.as_mut())
        {
            let rows = g.touched_rows().to_vec();
            adam_step_rows(params, g.values(), &rows, 1, state)?;
        }
        for ((p, g), state) in model
            .dense_params_mut()
            .into_iter()
            .zip(grads.dense())
            .zip(&mut self.dense)
        {
            adam_step(p, g, state)?;
        }
        Ok(())
    }
}

/// Unweighted logloss and AUC of `model` over `samples`. Read-only.
pub fn evaluate(model: &Model, samples: &[Sample]) -> Result<MetricsReport> {
    evaluate_with(Execution::default(), model, samples)
}

pub fn evaluate_with(exec: Execution, model: &Model, samples: &[Sample]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::data("cannot evaluate an empty partition"));
    }
    let scores = par::map(exec, samples, |s| model.predict(&s.features))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    MetricsReport::compute(exec, &labels, &scores)
}

/// Per-epoch shuffled visiting order over the training partition.
pub struct Shuffler {
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Shuffler {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // keep shuffling independent of the parameter-init stream
        rng.set_stream(1);
        Self {
            order: (0..len).collect(),
            rng,
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}

fn retag(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Training { message, .. } => Error::Training {
            epoch,
            batch,
            message,
        },
        other => other,
    }
}

/// Trains a model on the training partition with early stopping on the
/// validation partition and returns the best checkpoint.
pub fn train(dataset: &DayIndexedDataset, config: &TrainConfig) -> Result<(Model, RunRecord)> {
    let started = Instant::now();
    config.validate()?;
    if config.loss.n_days != dataset.n_days {
        return Err(Error::config(format!(
            "loss configured for {} days but the training partition has {}",
            config.loss.n_days, dataset.n_days
        )));
    }
    if config.model.field_count != dataset.field_count() {
        return Err(Error::config(format!(
            "model expects {} fields but the dataset has {}",
            config.model.field_count,
            dataset.field_count()
        )));
    }
    let (train_set, val_set) = (dataset.train(), dataset.val());
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::data("training needs non-empty train and validation partitions"));
    }

    let multiplier = config.weight_multiplier.unwrap_or(1.0);
    let weights = train_set
        .iter()
        .map(|s| Ok(tif_weight(&config.loss, s.day)? * multiplier))
        .collect::<Result<Vec<f64>>>()?;

    let mut model = Model::build(config.model.clone(), dataset.vocab_size(), config.seed)?;
    let mut optimizer = Optimizer::new(&mut model, AdamConfig::with_lr(config.learning_rate));
    let mut grads = model.zero_gradients();
    let mut shuffler = Shuffler::new(train_set.len(), config.seed);

    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        let mut loss_sum = 0.0;
        for (batch, chunk) in shuffler.next_epoch().chunks(config.batch_size).enumerate() {
            let batch = batch + 1;
            grads.clear();
            let mut weight_sum = 0.0;
            for &i in chunk {
                let s = &train_set[i];
                let v = model
                    .accumulate_gradients(&s.features, s.label, weights[i], &mut grads)
                    .map_err(|e| retag(e, epoch, batch))?;
                loss_sum += v.weighted;
                weight_sum += weights[i];
            }
            let denom = match config.reduction {
                Reduction::Mean => chunk.len() as f64,
                Reduction::WeightSum => weight_sum,
            };
            grads.scale(1.0 / denom);
            optimizer
                .step(&mut model, &mut grads)
                .map_err(|e| retag(e, epoch, batch))?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: 0,
                message: format!("training loss diverged to {train_loss}"),
            });
        }
        let report = evaluate(&model, val_set)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_logloss: report.logloss,
            val_auc: report.auc,
        });
        let score = config.eval_metric.value(&report);
        match &best {
            Some((b, _, _)) if !config.eval_metric.improves(score, *b) => {
                since_best += 1;
                if since_best >= config.early_stop_patience {
                    break;
                }
            }
            _ => {
                best = Some((score, epoch, model.clone()));
                since_best = 0;
            }
        }
    }

    let stopped_epoch = epochs.len();
    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    Ok((
        best_model,
        RunRecord {
            config_hash: config.config_hash(),
            epochs,
            best_epoch,
            stopped_epoch,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_drift, DriftConfig};
    use crate::losses::{weighted_bce, LossVariant};
    use crate::models::Interaction;

    fn dataset(n_days: u32, seed: u64) -> DayIndexedDataset {
        generate_drift(&DriftConfig {
            n_days,
            samples_per_day: 300,
            field_count: 3,
            cardinality: 8,
            seed,
            ..DriftConfig::default()
        })
        .unwrap()
        .dataset()
        .unwrap()
    }

    fn config(ds: &DayIndexedDataset, variant: LossVariant) -> TrainConfig {
        let mut model = ModelSpec::new(Interaction::MlpOnly, ds.field_count());
        model.embedding_dim = 4;
        model.hidden_widths = vec![8];
        let mut c = TrainConfig::new(model, LossSpec::new(variant, ds.n_days), 3);
        c.batch_size = 64;
        c.max_epochs = 4;
        c.learning_rate = 1e-2;
        c
    }

    #[test]
    fn repeat_runs_are_identical() {
        let ds = dataset(5, 1);
        let c = config(&ds, LossVariant::Linear);
        let (m1, r1) = train(&ds, &c).unwrap();
        let (m2, r2) = train(&ds, &c).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.without_timing(), r2.without_timing());
    }

    #[test]
    fn day_count_mismatch_is_config_error() {
        let ds = dataset(5, 1);
        let mut c = config(&ds, LossVariant::Linear);
        c.loss.n_days += 1;
        assert!(matches!(train(&ds, &c), Err(Error::Config(_))));
    }

    #[test]
    fn best_checkpoint_is_restored() {
        let ds = dataset(5, 2);
        let mut c = config(&ds, LossVariant::Plain);
        c.max_epochs = 6;
        c.learning_rate = 0.05;
        let (model, record) = train(&ds, &c).unwrap();
        let best = record
            .epochs
            .iter()
            .map(|e| e.val_auc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(record.epochs[record.best_epoch - 1].val_auc, best);
        assert_eq!(evaluate(&model, ds.val()).unwrap().auc, best);
        assert!(record.stopped_epoch <= c.max_epochs);
    }

    #[test]
    fn evaluate_is_read_only_and_repeatable() {
        let ds = dataset(5, 3);
        let model = Model::build(config(&ds, LossVariant::Plain).model, ds.vocab_size(), 0).unwrap();
        let before = model.clone();
        let a = evaluate(&model, ds.test()).unwrap();
        let b = evaluate_with(Execution::Sequential, &model, ds.test()).unwrap();
        assert_eq!(a, b);
        assert_eq!(model, before);
    }

    #[test]
    fn zero_model_scores_half() {
        let ds = dataset(5, 4);
        let mut model = Model::build(config(&ds, LossVariant::Plain).model, ds.vocab_size(), 0).unwrap();
        let n = model.parameter_count();
        model.set_flat_params(&vec![0.0; n]).unwrap();
        let r = evaluate(&model, ds.test()).unwrap();
        assert_eq!(r.auc, 0.5);
        assert!((r.logloss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn shuffling_permutes_without_losing_samples() {
        let mut s = Shuffler::new(100, 9);
        let first = s.next_epoch().to_vec();
        let second = s.next_epoch().to_vec();
        assert_ne!(first, second);
        let mut sorted = second.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn newer_days_cost_more_under_linear_weights() {
        let spec = LossSpec::new(LossVariant::Linear, 8);
        for t in 1..8 {
            let older = weighted_bce(&spec, 1, 0.3, t).unwrap().weighted;
            let newer = weighted_bce(&spec, 1, 0.3, t + 1).unwrap().weighted;
            assert!(older < newer);
        }
    }

    #[test]
    fn weight_sum_reduction_trains() {
        let ds = dataset(5, 5);
        let mut c = config(&ds, LossVariant::Exponential);
        c.reduction = Reduction::WeightSum;
        c.weight_multiplier = Some(2.0);
        let (_, r) = train(&ds, &c).unwrap();
        assert!(r.epochs.iter().all(|e| e.train_loss.is_finite()));
        assert_ne!(c.config_hash(), config(&ds, LossVariant::Exponential).config_hash());
    }
}
