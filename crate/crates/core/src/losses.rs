//! Binary cross-entropy and the temporal importance weights.
//!
//! A training sample from day `t` of an `N`-day window has its BCE
//! multiplied by one of:
//!
//! | variant      | config name  | weight                      |
//! |--------------|--------------|-----------------------------|
//! | plain        | `plain`      | `1`                         |
//! | linear       | `tif_linear` | `α·t/N`                     |
//! | anti         | `tif_anti`   | `(N − t + 1)/N`             |
//! | exponential  | `tif_exp`    | `(eᵗ − 1)/(eᴺ − 1)`         |
//! | logarithmic  | `tif_log`    | `(ln t + 1)/(ln N + 1)`     |
//!
//! With `α = 1` every weight lies in `(0, 1]`. Weights only ever touch the
//! training objective; evaluation logloss is unweighted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Predictions are clamped to `[PROB_EPS, 1 − PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Floor for weights whose exact value underflows `f64`.
pub const MIN_WEIGHT: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossVariant {
    #[serde(rename = "plain")]
    Plain,
    #[serde(rename = "tif_linear")]
    Linear,
    #[serde(rename = "tif_anti")]
    Anti,
    #[serde(rename = "tif_exp")]
    Exponential,
    #[serde(rename = "tif_log")]
    Logarithmic,
}

impl LossVariant {
    pub const ALL: [LossVariant; 5] = [
        LossVariant::Plain,
        LossVariant::Linear,
        LossVariant::Anti,
        LossVariant::Exponential,
        LossVariant::Logarithmic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Plain => "plain",
            LossVariant::Linear => "tif_linear",
            LossVariant::Anti => "tif_anti",
            LossVariant::Exponential => "tif_exp",
            LossVariant::Logarithmic => "tif_log",
        }
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown loss variant {s:?} (expected plain, tif_linear, tif_anti, tif_exp or tif_log)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub variant: LossVariant,
    /// Scale on the linear schedule only.
    pub alpha: f64,
    /// Number of calendar days in the training partition.
    pub n_days: u32,
}

impl LossSpec {
    pub fn new(variant: LossVariant, n_days: u32) -> Self {
        Self {
            variant,
            alpha: 1.0,
            n_days,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_days < 1 {
            return Err(Error::config("loss n_days must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedLossValue {
    pub raw_bce: f64,
    pub weight: f64,
    pub weighted: f64,
}

fn check_label(label: u8) -> Result<()> {
    if label > 1 {
        return Err(Error::data(format!("label must be 0 or 1, got {label}")));
    }
    Ok(())
}

pub fn clamp_prob(yhat: f64) -> f64 {
    yhat.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `−(y·ln ŷ + (1−y)·ln(1−ŷ))` on the clamped prediction.
pub fn bce(label: u8, yhat: f64) -> Result<f64> {
    check_label(label)?;
    let p = clamp_prob(yhat);
    Ok(if label == 1 { -p.ln() } else { -(1.0 - p).ln() })
}

/// `∂ bce / ∂ ŷ`; zero where the clamp is active.
pub fn bce_grad(label: u8, yhat: f64) -> Result<f64> {
    check_label(label)?;
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&yhat) {
        return Ok(0.0);
    }
    Ok(if label == 1 { -1.0 / yhat } else { 1.0 / (1.0 - yhat) })
}

/// `∂ bce(σ(z)) / ∂ z = ŷ − y`; zero where the clamp is active.
pub fn bce_logit_grad(label: u8, yhat: f64) -> Result<f64> {
    check_label(label)?;
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&yhat) {
        return Ok(0.0);
    }
    Ok(yhat - f64::from(label))
}

/// Temporal importance weight of a sample from day `t` (1 = oldest).
pub fn tif_weight(spec: &LossSpec, t: u32) -> Result<f64> {
    let n = spec.n_days;
    if t < 1 || t > n {
        return Err(Error::data(format!("day index {t} outside 1..={n}")));
    }
    let (t, n) = (f64::from(t), f64::from(n));
    Ok(match spec.variant {
        LossVariant::Plain => 1.0,
        LossVariant::Linear => spec.alpha * t / n,
        LossVariant::Anti => (n - t + 1.0) / n,
        // (eᵗ−1)/(eᴺ−1) rewritten so nothing overflows for large N. Old days
        // of long windows fall below f64 range and are floored, never zero.
        LossVariant::Exponential => {
            ((t - n).exp() * (-(-t).exp_m1()) / (-(-n).exp_m1())).max(MIN_WEIGHT)
        }
        LossVariant::Logarithmic => (t.ln() + 1.0) / (n.ln() + 1.0),
    })
}

pub fn weighted_bce(spec: &LossSpec, label: u8, yhat: f64, t: u32) -> Result<WeightedLossValue> {
    let raw_bce = bce(label, yhat)?;
    let weight = tif_weight(spec, t)?;
    Ok(WeightedLossValue {
        raw_bce,
        weight,
        weighted: raw_bce * weight,
    })
}

/// `∂ weighted_bce / ∂ ŷ`: the plain BCE gradient scaled by the weight.
pub fn weighted_bce_grad(spec: &LossSpec, label: u8, yhat: f64, t: u32) -> Result<f64> {
    Ok(bce_grad(label, yhat)? * tif_weight(spec, t)?)
}
