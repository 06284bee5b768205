//! Recency-weighted binary cross-entropy for deep click-through-rate models.
//!
//! Samples carry the calendar-day order `t` of the interaction inside the
//! training window. The training loss multiplies each sample's BCE by a
//! temporal importance weight that grows with `t` (linear, exponential or
//! logarithmic schedule), or shrinks with it (the anti schedule used as an
//! ablation). Everything else in the crate exists to measure that effect:
//!
//! - [`numkernel`]: dense layers, embeddings, FM and cross layers with manual
//!   backward passes, plus Adam.
//! - [`models`]: DNN, DeepFM-style and DCN-style networks over the kernel.
//! - [`losses`]: BCE and the weight schedules.
//! - [`data`]: Avazu-style CSV ingestion, chronological splitting, day
//!   indexing and a synthetic concept-drift generator.
//! - [`metrics`]: logloss, AUC and RelaImp.
//! - [`trainer`]: the mini-batch loop with early stopping.
//! - [`harness`]: config-driven experiments and comparison tables.
//!
//! With the default `parallel` feature, batch evaluation, AUC ranking and
//! experiment cells run on rayon. Without it the same code paths run
//! sequentially and produce identical numbers.

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod numkernel;
pub mod par;
pub mod trainer;

pub use error::{Error, Result};
