//! Evaluation metrics: logloss, AUC and RelaImp.

use serde::{Deserialize, Serialize};

use crate::losses::bce;
use crate::par::{self, Execution};
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

/// Unweighted metrics over one partition.
///
/// JSON layout (version 1):
/// `{"version":1,"logloss":f64,"auc":f64,"sample_count":u64,"positive_count":u64,"relaimp_vs_baseline":f64|null}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub version: u32,
    pub logloss: f64,
    pub auc: f64,
    pub sample_count: u64,
    pub positive_count: u64,
    /// Percentage, present once compared against a baseline.
    pub relaimp_vs_baseline: Option<f64>,
}

impl MetricsReport {
    pub fn compute(exec: Execution, labels: &[u8], scores: &[f64]) -> Result<Self> {
        Ok(Self {
            version: REPORT_VERSION,
            logloss: logloss(labels, scores)?,
            auc: auc_with(exec, labels, scores)?,
            sample_count: labels.len() as u64,
            positive_count: labels.iter().filter(|&&l| l == 1).count() as u64,
            relaimp_vs_baseline: None,
        })
    }

    pub fn with_baseline(mut self, baseline_auc: f64) -> Result<Self> {
        self.relaimp_vs_baseline = Some(rela_imp(baseline_auc, self.auc)?);
        Ok(self)
    }
}

fn check_inputs(labels: &[u8], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::data(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::data("metric over an empty set"));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::data(format!("score {i} is NaN")));
    }
    Ok(())
}

/// Mean BCE with clamped scores.
pub fn logloss(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_inputs(labels, scores)?;
    let mut total = 0.0;
    for (&y, &p) in labels.iter().zip(scores) {
        total += bce(y, p)?;
    }
    Ok(total / labels.len() as f64)
}

pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    auc_with(Execution::Sequential, labels, scores)
}

/// Mann–Whitney AUC from rank sums, ties credited ½.
///
/// Ranks are kept doubled so every intermediate is an exact integer; the
/// result is `(2·R⁺ − P(P+1)) / (2·P·N)` with one final division.
pub fn auc_with(exec: Execution, labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_inputs(labels, scores)?;
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::data(format!("label must be 0 or 1, got {bad}")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::MetricUndefined(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }

    let mut order: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    par::sort_unstable_by(exec, &mut order, |a, b| a.0.total_cmp(&b.0));

    let mut doubled_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && order[end].0 == order[start].0 {
            end += 1;
        }
        // 1-based ranks start+1..=end share the average (start+1+end)/2
        let doubled_avg = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|(_, l)| *l == 1).count() as u64;
        doubled_rank_sum += doubled_avg * pos_in_group;
        start = end;
    }
    let numerator = doubled_rank_sum - positives * (positives + 1);
    Ok(numerator as f64 / (2 * positives * negatives) as f64)
}

/// Relative AUC improvement in percent: `((new − 0.5)/(base − 0.5) − 1)·100`.
pub fn rela_imp(auc_baseline: f64, auc_new: f64) -> Result<f64> {
    if auc_baseline.is_nan() || auc_baseline <= 0.5 {
        return Err(Error::MetricUndefined(format!(
            "RelaImp needs a baseline AUC above 0.5, got {auc_baseline}"
        )));
    }
    Ok(((auc_new - 0.5) / (auc_baseline - 0.5) - 1.0) * 100.0)
}

/// Quadratic pair-counting AUC. Test oracle for [`auc`].
#[doc(hidden)]
pub fn auc_brute_force(labels: &[u8], scores: &[f64]) -> f64 {
    let (mut twice_credit, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                twice_credit += 2;
            } else if scores[i] == scores[j] {
                twice_credit += 1;
            }
        }
    }
    twice_credit as f64 / (2 * pairs) as f64
}
