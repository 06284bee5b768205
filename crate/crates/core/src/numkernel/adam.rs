use serde::{Deserialize, Serialize};

use super::check_len;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Moment estimates for one parameter array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            config,
        }
    }

    /// Advances the step counter and returns the two bias corrections.
    fn advance(&mut self) -> (f64, f64) {
        self.step_count += 1;
        let t = self.step_count as i32;
        (
            1.0 - self.config.beta1.powi(t),
            1.0 - self.config.beta2.powi(t),
        )
    }

    #[inline]
    fn update(&mut self, i: usize, p: &mut f64, g: f64, corr1: f64, corr2: f64) {
        let c = self.config;
        let m = &mut self.first_moment[i];
        let v = &mut self.second_moment[i];
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        *p -= c.lr * (*m / corr1) / ((*v / corr2).sqrt() + c.epsilon);
    }
}

fn check_finite(grads: &[f64], state: &AdamState) -> Result<()> {
    match grads.iter().position(|g| !g.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Training {
            epoch: 0,
            batch: state.step_count as usize + 1,
            message: format!("non-finite gradient at parameter {i}"),
        }),
    }
}

/// One bias-corrected Adam update over a dense parameter array.
///
/// A non-finite gradient leaves both `params` and `state` untouched; the
/// error's batch field carries the optimizer step that was rejected.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    check_len("adam gradient", params.len(), grads.len())?;
    check_len("adam state", params.len(), state.first_moment.len())?;
    check_finite(grads, state)?;
    let (c1, c2) = state.advance();
    for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
        state.update(i, p, g, c1, c2);
    }
    Ok(())
}

/// Adam restricted to the listed rows of a `dim`-wide table. Rows not
/// listed keep their parameters and moments; bias correction uses the
/// shared step counter.
pub fn adam_step_rows(
    params: &mut [f64],
    grads: &[f64],
    rows: &[u32],
    dim: usize,
    state: &mut AdamState,
) -> Result<()> {
    check_len("adam gradient", params.len(), grads.len())?;
    check_len("adam state", params.len(), state.first_moment.len())?;
    for &r in rows {
        let r = r as usize;
        if (r + 1) * dim > params.len() {
            return Err(Error::Internal(format!("row {r} outside parameter table")));
        }
        check_finite(&grads[r * dim..(r + 1) * dim], state)?;
    }
    let (c1, c2) = state.advance();
    for &r in rows {
        let start = r as usize * dim;
        for i in start..start + dim {
            state.update(i, &mut params[i], grads[i], c1, c2);
        }
    }
    Ok(())
}
