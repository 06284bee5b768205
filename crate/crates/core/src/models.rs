//! The three CTR architectures: DNN (MLP only), DeepFM-style (FM + MLP)
//! and DCN-style (cross network feeding an MLP).
//!
//! All three share one embedding table over a single vocabulary index
//! space; every sample supplies exactly one index per field.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::losses::{bce, bce_logit_grad, WeightedLossValue};
use crate::numkernel::{
    cross_backward, cross_forward, dense_backward_into, dense_forward, embedding_backward,
    embedding_forward, fm_backward, fm_forward, init_uniform, relu_backward, relu_forward, sigmoid,
    DenseMatrix, EmbeddingTable, RowGrad, Tape,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    #[serde(alias = "dnn")]
    MlpOnly,
    #[serde(alias = "deepfm")]
    FmPlusMlp,
    #[serde(alias = "dcn")]
    CrossPlusMlp,
}

impl Interaction {
    pub const ALL: [Interaction; 3] = [
        Interaction::MlpOnly,
        Interaction::FmPlusMlp,
        Interaction::CrossPlusMlp,
    ];

    /// Short model name used in configs and tables.
    pub fn model_name(self) -> &'static str {
        match self {
            Interaction::MlpOnly => "dnn",
            Interaction::FmPlusMlp => "deepfm",
            Interaction::CrossPlusMlp => "dcn",
        }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.model_name())
    }
}

impl FromStr for Interaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnn" | "mlp_only" => Ok(Interaction::MlpOnly),
            "deepfm" | "fm_plus_mlp" => Ok(Interaction::FmPlusMlp),
            "dcn" | "cross_plus_mlp" => Ok(Interaction::CrossPlusMlp),
            _ => Err(Error::config(format!(
                "unknown model {s:?} (expected dnn, deepfm or dcn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub interaction: Interaction,
    pub embedding_dim: usize,
    pub hidden_widths: Vec<usize>,
    /// Number of stacked cross layers; ignored unless `interaction` is cross.
    pub cross_depth: usize,
    pub field_count: usize,
    /// Adds a per-feature scalar weight to the FM logit. FM variant only.
    #[serde(default)]
    pub fm_first_order: bool,
}

impl ModelSpec {
    pub fn new(interaction: Interaction, field_count: usize) -> Self {
        Self {
            interaction,
            embedding_dim: 16,
            hidden_widths: vec![64, 64],
            cross_depth: 2,
            field_count,
            fm_first_order: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim < 1 {
            return Err(Error::config("embedding_dim must be at least 1"));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::config("hidden_widths must be non-empty and positive"));
        }
        if self.field_count < 1 {
            return Err(Error::config("field_count must be at least 1"));
        }
        match self.interaction {
            Interaction::CrossPlusMlp if self.cross_depth < 1 => {
                Err(Error::config("cross_depth must be at least 1"))
            }
            Interaction::FmPlusMlp if self.field_count < 2 => {
                Err(Error::config("the FM interaction needs at least 2 fields"))
            }
            _ => Ok(()),
        }
    }

    pub fn concat_width(&self) -> usize {
        self.field_count * self.embedding_dim
    }

    fn uses_first_order(&self) -> bool {
        self.interaction == Interaction::FmPlusMlp && self.fm_first_order
    }

    fn cross_layers(&self) -> usize {
        if self.interaction == Interaction::CrossPlusMlp {
            self.cross_depth
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossParams {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    spec: ModelSpec,
    vocab_size: usize,
    seed: u64,
    embedding: EmbeddingTable,
    first_order: Option<EmbeddingTable>,
    cross: Vec<CrossParams>,
    hidden: Vec<DenseLayer>,
    head: DenseLayer,
}

/// Gradient buffers shaped like a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: RowGrad,
    pub first_order: Option<RowGrad>,
    pub cross: Vec<(Vec<f64>, Vec<f64>)>,
    pub hidden: Vec<(Vec<f64>, Vec<f64>)>,
    pub head: (Vec<f64>, Vec<f64>),
}

impl Gradients {
    /// Non-embedding gradient arrays in model parameter order.
    pub fn dense(&self) -> Vec<&[f64]> {
        self.cross
            .iter()
            .chain(&self.hidden)
            .chain(std::iter::once(&self.head))
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    fn dense_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.cross
            .iter_mut()
            .chain(self.hidden.iter_mut())
            .chain(std::iter::once(&mut self.head))
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.embedding.scale(factor);
        if let Some(g) = &mut self.first_order {
            g.scale(factor);
        }
        for v in self.dense_mut() {
            v.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn clear(&mut self) {
        self.embedding.clear();
        if let Some(g) = &mut self.first_order {
            g.clear();
        }
        for v in self.dense_mut() {
            v.fill(0.0);
        }
    }

    /// Every gradient entry in [`Model::flat_params`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.embedding.values().to_vec();
        if let Some(g) = &self.first_order {
            out.extend_from_slice(g.values());
        }
        for d in self.dense() {
            out.extend_from_slice(d);
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }
}

impl Model {
    /// Deterministically initialised model: embeddings and weights uniform
    /// in `[-0.05, 0.05]`, biases zero.
    pub fn build(spec: ModelSpec, vocab_size: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if vocab_size < 1 {
            return Err(Error::config("vocab_size must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embedding = EmbeddingTable::random(vocab_size, spec.embedding_dim, &mut rng);
        let first_order = spec
            .uses_first_order()
            .then(|| EmbeddingTable::random(vocab_size, 1, &mut rng));
        let width = spec.concat_width();
        let cross = (0..spec.cross_layers())
            .map(|_| CrossParams {
                weight: init_uniform(&mut rng, width),
                bias: vec![0.0; width],
            })
            .collect();
        let mut hidden = Vec::with_capacity(spec.hidden_widths.len());
        let mut fan_in = width;
        for &w in &spec.hidden_widths {
            hidden.push(DenseLayer {
                weight: DenseMatrix::new(w, fan_in, init_uniform(&mut rng, w * fan_in))?,
                bias: vec![0.0; w],
            });
            fan_in = w;
        }
        let head = DenseLayer {
            weight: DenseMatrix::new(1, fan_in, init_uniform(&mut rng, fan_in))?,
            bias: vec![0.0],
        };
        Ok(Self {
            spec,
            vocab_size,
            seed,
            embedding,
            first_order,
            cross,
            hidden,
            head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embedding(&self) -> &EmbeddingTable {
        &self.embedding
    }

    pub fn head(&self) -> &DenseLayer {
        &self.head
    }

    pub fn hidden(&self) -> &[DenseLayer] {
        &self.hidden
    }

    pub fn parameter_count(&self) -> usize {
        self.flat_params().len()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            embedding: RowGrad::new(self.vocab_size, self.spec.embedding_dim),
            first_order: self.first_order.as_ref().map(|_| RowGrad::new(self.vocab_size, 1)),
            cross: self
                .cross
                .iter()
                .map(|c| (vec![0.0; c.weight.len()], vec![0.0; c.bias.len()]))
                .collect(),
            hidden: self
                .hidden
                .iter()
                .map(|l| (vec![0.0; l.weight.data().len()], vec![0.0; l.bias.len()]))
                .collect(),
            head: (vec![0.0; self.head.weight.data().len()], vec![0.0; 1]),
        }
    }

    /// Embedding parameters (table, then optional first-order weights).
    pub fn embedding_params_mut(&mut self) -> (&mut [f64], Option<&mut [f64]>) {
        (
            self.embedding.data_mut(),
            self.first_order.as_mut().map(|t| t.data_mut()),
        )
    }

    /// Non-embedding parameter arrays, in the same order as [`Gradients::dense`].
    pub fn dense_params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for c in &mut self.cross {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for l in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(l.weight.data_mut());
            out.push(&mut l.bias);
        }
        out
    }

    fn dense_params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for c in &self.cross {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        for l in self.hidden.iter().chain(std::iter::once(&self.head)) {
            out.push(l.weight.data());
            out.push(&l.bias);
        }
        out
    }

    /// All parameters flattened: embedding, first-order, cross, hidden, head.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = self.embedding.data().to_vec();
        if let Some(t) = &self.first_order {
            out.extend_from_slice(t.data());
        }
        for d in self.dense_params() {
            out.extend_from_slice(d);
        }
        out
    }

    /// Overwrites every parameter from a slice in [`Model::flat_params`] order.
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut rest = values;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        let (emb, first) = self.embedding_params_mut();
        take(emb);
        if let Some(f) = first {
            take(f);
        }
        for d in self.dense_params_mut() {
            take(d);
        }
        Ok(())
    }

    /// SHA-256 over the little-endian bytes of every parameter.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.flat_params() {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_features(&self, features: &[u32]) -> Result<()> {
        if features.len() != self.spec.field_count {
            return Err(Error::data(format!(
                "expected {} feature indices, got {}",
                self.spec.field_count,
                features.len()
            )));
        }
        Ok(())
    }

    /// Pre-sigmoid output, recording activations on `tape`.
    pub fn forward(&self, features: &[u32], tape: &mut Tape) -> Result<f64> {
        self.check_features(features)?;
        let x0 = embedding_forward(&self.embedding, features, tape)?;

        let mut extra = 0.0;
        if self.spec.interaction == Interaction::FmPlusMlp {
            if let Some(table) = &self.first_order {
                extra += embedding_forward(table, features, tape)?.iter().sum::<f64>();
            }
            extra += fm_forward(&x0, self.spec.embedding_dim, tape)?;
        }

        let mut h = x0.clone();
        for c in &self.cross {
            h = cross_forward(&x0, &h, &c.weight, &c.bias, tape)?;
        }
        for layer in &self.hidden {
            let z = dense_forward(&layer.weight, &layer.bias, &h, tape)?;
            h = relu_forward(&z, tape);
        }
        let out = dense_forward(&self.head.weight, &self.head.bias, &h, tape)?;
        Ok(out[0] + extra)
    }

    /// Pops everything [`Model::forward`] recorded and adds `∂/∂params`
    /// of `dlogit · logit` into `grads`.
    pub fn backward(&self, tape: &mut Tape, dlogit: f64, grads: &mut Gradients) -> Result<()> {
        let mut g = dense_backward_into(
            &self.head.weight,
            tape,
            &[dlogit],
            &mut grads.head.0,
            &mut grads.head.1,
        )?;
        for (layer, (gw, gb)) in self.hidden.iter().zip(grads.hidden.iter_mut()).rev() {
            g = relu_backward(tape, &g)?;
            g = dense_backward_into(&layer.weight, tape, &g, gw, gb)?;
        }
        if !self.cross.is_empty() {
            // x0 feeds every cross layer; the first layer also takes it as xl
            let mut gx0 = vec![0.0; g.len()];
            for (c, (gw, gb)) in self.cross.iter().zip(grads.cross.iter_mut()).rev() {
                let cg = cross_backward(&c.weight, tape, &g)?;
                add_into(gw, &cg.weight);
                add_into(gb, &cg.bias);
                add_into(&mut gx0, &cg.x0);
                g = cg.xl;
            }
            add_into(&mut g, &gx0);
        }
        if self.spec.interaction == Interaction::FmPlusMlp {
            let gfm = fm_backward(tape, dlogit)?;
            add_into(&mut g, &gfm);
            if let Some(first) = grads.first_order.as_mut() {
                let ones = vec![dlogit; self.spec.field_count];
                embedding_backward(tape, &ones, first)?;
            }
        }
        embedding_backward(tape, &g, &mut grads.embedding)?;
        if !tape.is_empty() {
            return Err(Error::Internal(format!(
                "{} unconsumed tape records after backward",
                tape.len()
            )));
        }
        Ok(())
    }

    pub fn logit(&self, features: &[u32]) -> Result<f64> {
        self.forward(features, &mut Tape::new())
    }

    /// Click probability in `(0, 1)`.
    pub fn predict(&self, features: &[u32]) -> Result<f64> {
        Ok(sigmoid(self.logit(features)?))
    }

    /// Adds the gradient of `weight · BCE(label, ŷ)` into `grads` and
    /// returns the loss.
    pub fn accumulate_gradients(
        &self,
        features: &[u32],
        label: u8,
        weight: f64,
        grads: &mut Gradients,
    ) -> Result<WeightedLossValue> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::config(format!("sample weight must be positive, got {weight}")));
        }
        let mut tape = Tape::new();
        let logit = self.forward(features, &mut tape)?;
        if !logit.is_finite() {
            return Err(Error::Training {
                epoch: 0,
                batch: 0,
                message: format!("non-finite logit {logit}"),
            });
        }
        let yhat = sigmoid(logit);
        let raw_bce = bce(label, yhat)?;
        let dlogit = weight * bce_logit_grad(label, yhat)?;
        self.backward(&mut tape, dlogit, grads)?;
        Ok(WeightedLossValue {
            raw_bce,
            weight,
            weighted: raw_bce * weight,
        })
    }

    pub fn forward_backward(
        &self,
        features: &[u32],
        label: u8,
        weight: f64,
    ) -> Result<(WeightedLossValue, Gradients)> {
        let mut grads = self.zero_gradients();
        let loss = self.accumulate_gradients(features, label, weight, &mut grads)?;
        Ok((loss, grads))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            model: self,
        };
        let json = serde_json::to_string(&ckpt).map_err(|e| Error::Internal(e.to_string()))?;
        crate::harness::write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text)
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::data(format!("malformed checkpoint: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::data(format!("not a checkpoint: format {:?}", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::data(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        let model = ckpt.model;
        let fresh = Model::build(model.spec.clone(), model.vocab_size, model.seed)?;
        let shape = |m: &Model| -> Vec<usize> {
            let mut s = vec![m.embedding.data().len()];
            s.extend(m.first_order.as_ref().map(|t| t.data().len()));
            s.extend(m.dense_params().iter().map(|d| d.len()));
            s
        };
        if shape(&model) != shape(&fresh) || model.embedding.dim() != fresh.embedding.dim() {
            return Err(Error::data("checkpoint parameter shapes do not match its spec"));
        }
        if model.flat_params().iter().any(|v| !v.is_finite()) {
            return Err(Error::data("checkpoint contains non-finite parameters"));
        }
        Ok(model)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Checkpoint file layout (JSON):
///
/// ```text
/// { "format": "tif-ctr-checkpoint", "version": 1,
///   "model": { "spec": {...}, "vocab_size": n, "seed": s,
///              "embedding": {"vocab_size", "dim", "data": [...]},
///              "first_order": null | {...},
///              "cross":  [{"weight": [...], "bias": [...]}, ...],
///              "hidden": [{"weight": {"rows", "cols", "data"}, "bias": [...]}, ...],
///              "head":   {"weight": {...}, "bias": [b]} } }
/// ```
pub const CHECKPOINT_FORMAT: &str = "tif-ctr-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a Model,
}

#[derive(Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: Model,
}
