//! Dense numeric kernel: the handful of layers the CTR models need, each
//! with a hand-written backward pass driven by a [`Tape`], plus Adam.
//!
//! All arithmetic is `f64`. Forward functions push what their backward
//! needs onto the tape; backward functions pop it, so a model's backward
//! pass must call layers in exactly the reverse order of its forward pass.

mod activation;
mod adam;
mod dense;
mod embedding;
mod interaction;
mod tape;

pub use activation::{relu, relu_backward, relu_forward, sigmoid};
pub use adam::{adam_step, adam_step_rows, AdamConfig, AdamState};
pub use dense::{dense_backward, dense_backward_into, dense_forward, DenseGrads, DenseMatrix};
pub use embedding::{embedding_backward, embedding_forward, EmbeddingTable, RowGrad};
pub use interaction::{
    cross_backward, cross_forward, cross_layer, fm_backward, fm_forward, fm_interaction,
    CrossGrads,
};
pub use tape::{Record, Tape};

use rand::Rng;

/// Half-width of the uniform initialisation range.
pub const INIT_SCALE: f64 = 0.05;

/// Draws `len` values uniformly from `[-INIT_SCALE, INIT_SCALE]`.
pub fn init_uniform<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
        .collect()
}

pub(crate) fn check_len(what: &str, expected: usize, got: usize) -> crate::Result<()> {
    if expected != got {
        return Err(crate::Error::Config(format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}
