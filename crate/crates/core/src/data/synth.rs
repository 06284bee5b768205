use std::f64::consts::PI;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::split::{chronological_split, PrepOptions};
use super::{DayIndexedDataset, RawRecord, RecordSet, Timestamp};
use crate::harness::write_atomic;
use crate::numkernel::sigmoid;
use crate::{Error, Result};

/// Rotation of the latent coefficients per day at `drift_rate = 1`.
pub const MAX_ROTATION_PER_DAY: f64 = PI / 8.0;

/// Synthetic stream with a known, rotating click model.
///
/// Every `(field, value)` pair owns two standard-normal directions `a` and
/// `b`. On day `d` (0-based) its logit contribution is
/// `signal_scale · (cos θ_d · a + sin θ_d · b)` with
/// `θ_d = d · drift_rate · MAX_ROTATION_PER_DAY`. Labels are Bernoulli draws
/// of `σ(logit(base_ctr) + Σ contributions + noise_scale · ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    pub n_days: u32,
    pub samples_per_day: usize,
    pub field_count: usize,
    pub cardinality: usize,
    pub drift_rate: f64,
    pub base_ctr: f64,
    pub signal_scale: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            n_days: 10,
            samples_per_day: 5000,
            field_count: 8,
            cardinality: 20,
            drift_rate: 0.5,
            base_ctr: 0.2,
            signal_scale: 0.5,
            noise_scale: 0.3,
            seed: 0,
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(format!("drift config: {m}")));
        if self.n_days < 1 || self.samples_per_day < 1 {
            return fail("n_days and samples_per_day must be at least 1");
        }
        if self.field_count < 1 || self.cardinality < 1 {
            return fail("field_count and cardinality must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.drift_rate) {
            return fail("drift_rate must lie in [0, 1]");
        }
        if !(self.base_ctr > 0.0 && self.base_ctr < 1.0) {
            return fail("base_ctr must lie in (0, 1)");
        }
        if !(self.signal_scale >= 0.0 && self.noise_scale >= 0.0) {
            return fail("signal_scale and noise_scale must be non-negative");
        }
        Ok(())
    }

    pub fn start_date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 10, 21).expect("valid date")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub config: DriftConfig,
    pub records: RecordSet,
    /// `coefficients[day][field * cardinality + value]`, day 0 first.
    pub coefficients: Vec<Vec<f64>>,
}

impl SyntheticData {
    /// Preparation defaults for synthetic data: every value kept, no time features.
    pub fn prep_options() -> PrepOptions {
        PrepOptions {
            min_frequency: 1,
            time_features: false,
            ..PrepOptions::default()
        }
    }

    pub fn dataset(&self) -> Result<DayIndexedDataset> {
        chronological_split(&self.records, &Self::prep_options())
    }

    /// Pearson correlation between the coefficients of two days.
    pub fn coefficient_correlation(&self, day_a: usize, day_b: usize) -> f64 {
        pearson(&self.coefficients[day_a], &self.coefficients[day_b])
    }

    /// Sidecar file: `day,field,value,coefficient`, days 1-based.
    pub fn write_coefficients(&self, path: &Path) -> Result<()> {
        let card = self.config.cardinality;
        let mut out = String::from("day,field,value,coefficient\n");
        for (d, coeffs) in self.coefficients.iter().enumerate() {
            for (k, c) in coeffs.iter().enumerate() {
                out.push_str(&format!("{},{},{},{c}\n", d + 1, field_name(k / card), value_name(k % card)));
            }
        }
        write_atomic(path, out.as_bytes())
    }
}

fn field_name(f: usize) -> String {
    format!("c{f}")
}

fn value_name(v: usize) -> String {
    format!("v{v}")
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Generates a chronologically ordered stream under rotating concept drift.
pub fn generate_drift(config: &DriftConfig) -> Result<SyntheticData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.field_count * config.cardinality;
    let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let a = normal(width);
    let b = normal(width);

    let coefficients: Vec<Vec<f64>> = (0..config.n_days)
        .map(|d| {
            let theta = f64::from(d) * config.drift_rate * MAX_ROTATION_PER_DAY;
            let (s, c) = theta.sin_cos();
            a.iter()
                .zip(&b)
                .map(|(ai, bi)| config.signal_scale * (c * ai + s * bi))
                .collect()
        })
        .collect();

    let base_logit = (config.base_ctr / (1.0 - config.base_ctr)).ln();
    let mut records = Vec::with_capacity(config.n_days as usize * config.samples_per_day);
    for (d, coeffs) in coefficients.iter().enumerate() {
        let date = DriftConfig::start_date() + Days::new(d as u64);
        let mut hours: Vec<u8> = (0..config.samples_per_day)
            .map(|_| rng.random_range(0..24))
            .collect();
        hours.sort_unstable();
        for hour in hours {
            let mut logit = base_logit;
            let mut values = Vec::with_capacity(config.field_count);
            for f in 0..config.field_count {
                let v = rng.random_range(0..config.cardinality);
                logit += coeffs[f * config.cardinality + v];
                values.push(value_name(v));
            }
            let eps: f64 = rng.sample(StandardNormal);
            logit += config.noise_scale * eps;
            let label = u8::from(rng.random::<f64>() < sigmoid(logit));
            records.push(RawRecord {
                timestamp: Timestamp::new(date, hour)?,
                values,
                label,
            });
        }
    }
    Ok(SyntheticData {
        config: config.clone(),
        records: RecordSet {
            fields: (0..config.field_count).map(field_name).collect(),
            records,
        },
        coefficients,
    })
}
