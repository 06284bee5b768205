use serde::{Deserialize, Serialize};

use super::vocab::build_vocab;
use super::{DayIndexedDataset, RawRecord, RecordSet, Sample};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepOptions {
    /// train : validation : test proportions by sample count.
    pub ratios: [u32; 3],
    pub min_frequency: u32,
    /// Append `hour`, `weekday` and `is_weekend` fields derived from the timestamp.
    pub time_features: bool,
    /// Snap split points to the nearest calendar-day boundary.
    pub day_aligned: bool,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            ratios: [8, 1, 1],
            min_frequency: 2,
            time_features: true,
            day_aligned: false,
        }
    }
}

impl PrepOptions {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().sum::<u32>() == 0 || self.ratios[0] == 0 {
            return Err(Error::config("split ratios need a positive training share"));
        }
        if self.min_frequency < 1 {
            return Err(Error::config("min_frequency must be at least 1"));
        }
        Ok(())
    }
}

pub(super) const TIME_FIELDS: [&str; 3] = ["hour", "weekday", "is_weekend"];

fn feature_values(rec: &RawRecord, time_features: bool) -> Vec<String> {
    let mut values = rec.values.clone();
    if time_features {
        let tf = rec.timestamp.features();
        values.push(tf.hour.to_string());
        values.push(tf.weekday.to_string());
        values.push(u8::from(tf.is_weekend).to_string());
    }
    values
}

/// Moves `cut` forward past samples sharing the timestamp just before it,
/// so no timestamp straddles a partition boundary.
fn clear_ties(sorted: &[&RawRecord], mut cut: usize) -> usize {
    while cut > 0 && cut < sorted.len() && sorted[cut].timestamp == sorted[cut - 1].timestamp {
        cut += 1;
    }
    cut
}

fn nearest_day_boundary(sorted: &[&RawRecord], cut: usize) -> usize {
    let is_boundary = |i: usize| {
        i == 0 || i == sorted.len() || sorted[i].timestamp.date() != sorted[i - 1].timestamp.date()
    };
    let mut back = cut;
    while !is_boundary(back) {
        back -= 1;
    }
    let mut fwd = cut;
    while !is_boundary(fwd) {
        fwd += 1;
    }
    if cut - back <= fwd - cut {
        back
    } else {
        fwd
    }
}

/// Sorts records by timestamp (stable), splits them by sample count,
/// assigns calendar-day indices and builds the vocabulary from the
/// training partition.
pub fn chronological_split(set: &RecordSet, opts: &PrepOptions) -> Result<DayIndexedDataset> {
    opts.validate()?;
    let n = set.records.len();
    if n == 0 {
        return Err(Error::data("cannot split an empty record set"));
    }
    if let Some(r) = set.records.iter().find(|r| r.values.len() != set.fields.len()) {
        return Err(Error::data(format!(
            "record has {} values for {} fields",
            r.values.len(),
            set.fields.len()
        )));
    }
    let mut sorted: Vec<&RawRecord> = set.records.iter().collect();
    sorted.sort_by_key(|r| r.timestamp);

    let total: u64 = opts.ratios.iter().map(|&r| u64::from(r)).sum();
    let at = |share: u64| (n as u64 * share / total) as usize;
    let mut train_end = at(u64::from(opts.ratios[0]));
    let mut val_end = at(u64::from(opts.ratios[0] + opts.ratios[1]));
    if opts.day_aligned {
        train_end = nearest_day_boundary(&sorted, train_end);
        val_end = nearest_day_boundary(&sorted, val_end);
    }
    // the training partition always keeps at least the earliest timestamp
    let train_end = clear_ties(&sorted, train_end.max(1));
    let val_end = clear_ties(&sorted, val_end.max(train_end));

    let mut days = Vec::with_capacity(n);
    let mut day = 0u32;
    for (i, r) in sorted.iter().enumerate() {
        if i == 0 || r.timestamp.date() != sorted[i - 1].timestamp.date() {
            day += 1;
        }
        days.push(day);
    }
    let n_days = days[train_end - 1];

    let rows: Vec<Vec<String>> = sorted
        .iter()
        .map(|r| feature_values(r, opts.time_features))
        .collect();
    let vocabulary = build_vocab(&rows[..train_end], opts.min_frequency)?;
    let samples = rows
        .iter()
        .zip(&sorted)
        .zip(&days)
        .map(|((values, rec), &day)| Sample {
            features: vocabulary.encode(values),
            label: rec.label,
            day,
        })
        .collect();

    let mut field_names = set.fields.clone();
    if opts.time_features {
        field_names.extend(TIME_FIELDS.iter().map(|s| s.to_string()));
    }
    let ds = DayIndexedDataset {
        field_names,
        samples,
        timestamps: sorted.iter().map(|r| r.timestamp).collect(),
        n_days,
        train_end,
        val_end,
        vocabulary,
    };
    ds.check_invariants()?;
    Ok(ds)
}
