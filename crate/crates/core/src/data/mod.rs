//! Data preparation: CSV ingestion, time features, vocabulary, the
//! chronological 8:1:1 split with day indexing, and a synthetic
//! concept-drift generator.

mod csv_io;
mod split;
mod synth;
mod time;
mod vocab;

pub use csv_io::{load_csv, write_csv, CsvSchema, LoadReport, OnError};
pub use split::{chronological_split, PrepOptions};
pub use synth::{generate_drift, DriftConfig, SyntheticData};
pub use time::{derive_time_features, TimeFeatures, Timestamp};
pub use vocab::{build_vocab, Vocabulary, OOV_INDEX};

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::write_atomic;
use crate::{Error, Result};

/// One CSV row before encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub timestamp: Timestamp,
    /// Categorical values, aligned with [`RecordSet::fields`].
    pub values: Vec<String>,
    pub label: u8,
}

/// Records plus the categorical field names their values align with.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecordSet {
    pub fields: Vec<String>,
    pub records: Vec<RawRecord>,
}

/// An encoded interaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    /// One vocabulary index per field.
    pub features: Vec<u32>,
    pub label: u8,
    /// Calendar-day order, 1 = oldest training day. Validation and test
    /// samples continue the count past `N`.
    pub day: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Val => "val",
            Partition::Test => "test",
        }
    }
}

/// Chronologically ordered, encoded samples with split boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct DayIndexedDataset {
    pub field_names: Vec<String>,
    pub samples: Vec<Sample>,
    /// Per-sample timestamps, parallel to `samples`.
    pub timestamps: Vec<Timestamp>,
    /// Number of distinct calendar days in the training partition.
    pub n_days: u32,
    pub train_end: usize,
    pub val_end: usize,
    pub vocabulary: Vocabulary,
}

impl DayIndexedDataset {
    pub fn field_count(&self) -> usize {
        self.field_names.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.size()
    }

    pub fn range(&self, part: Partition) -> Range<usize> {
        match part {
            Partition::Train => 0..self.train_end,
            Partition::Val => self.train_end..self.val_end,
            Partition::Test => self.val_end..self.samples.len(),
        }
    }

    pub fn partition(&self, part: Partition) -> &[Sample] {
        &self.samples[self.range(part)]
    }

    pub fn train(&self) -> &[Sample] {
        self.partition(Partition::Train)
    }

    pub fn val(&self) -> &[Sample] {
        self.partition(Partition::Val)
    }

    pub fn test(&self) -> &[Sample] {
        self.partition(Partition::Test)
    }

    /// Checks the split and day-index invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Internal(m));
        if self.timestamps.len() != self.samples.len() {
            return bad("timestamps and samples differ in length".into());
        }
        if self.timestamps.windows(2).any(|w| w[0] > w[1]) {
            return bad("samples are not in chronological order".into());
        }
        let ts = |part| &self.timestamps[self.range(part)];
        for (earlier, later) in [
            (Partition::Train, Partition::Val),
            (Partition::Val, Partition::Test),
            (Partition::Train, Partition::Test),
        ] {
            if let (Some(a), Some(b)) = (ts(earlier).last(), ts(later).first()) {
                if a >= b {
                    return bad(format!(
                        "{} ends at {a} but {} starts at {b}",
                        earlier.name(),
                        later.name()
                    ));
                }
            }
        }
        let mut expected = 1;
        for s in self.train() {
            if s.day != expected && s.day != expected + 1 {
                return bad(format!("training day index jumps to {}", s.day));
            }
            expected = s.day;
        }
        if !self.train().is_empty() && (self.train()[0].day != 1 || expected != self.n_days) {
            return bad(format!(
                "training days run {}..={expected}, expected 1..={}",
                self.train()[0].day,
                self.n_days
            ));
        }
        let vocab = self.vocab_size() as u32;
        if self
            .samples
            .iter()
            .any(|s| s.features.len() != self.field_count() || s.features.iter().any(|&i| i >= vocab))
        {
            return bad("sample features do not match the vocabulary".into());
        }
        Ok(())
    }

    /// Writes `vocab.tsv`, `samples.csv` and `meta.json` into `dir`.
    ///
    /// `samples.csv` columns: `partition,day,timestamp,label,<field>...` with
    /// vocabulary indices in the field columns.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("vocab.tsv"), self.vocabulary.to_tsv(&self.field_names).as_bytes())?;

        let mut out = String::from("partition,day,timestamp,label");
        for f in &self.field_names {
            out.push(',');
            out.push_str(f);
        }
        out.push('\n');
        for part in [Partition::Train, Partition::Val, Partition::Test] {
            for i in self.range(part) {
                let s = &self.samples[i];
                out.push_str(&format!("{},{},{},{}", part.name(), s.day, self.timestamps[i], s.label));
                for idx in &s.features {
                    out.push_str(&format!(",{idx}"));
                }
                out.push('\n');
            }
        }
        write_atomic(&dir.join("samples.csv"), out.as_bytes())?;

        let meta = DatasetMeta::of(self);
        let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Internal(e.to_string()))?;
        write_atomic(&dir.join("meta.json"), json.as_bytes())
    }
}

/// Summary written next to prepared datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub fields: Vec<String>,
    pub n_days: u32,
    pub vocab_size: usize,
    pub min_frequency: u32,
    pub train: PartitionMeta,
    pub val: PartitionMeta,
    pub test: PartitionMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMeta {
    pub samples: usize,
    pub positives: usize,
    pub first_timestamp: Option<String>,
    pub last_timestamp: Option<String>,
}

impl DatasetMeta {
    pub fn of(ds: &DayIndexedDataset) -> Self {
        let part = |p: Partition| {
            let r = ds.range(p);
            PartitionMeta {
                samples: r.len(),
                positives: ds.samples[r.clone()].iter().filter(|s| s.label == 1).count(),
                first_timestamp: ds.timestamps[r.clone()].first().map(|t| t.to_string()),
                last_timestamp: ds.timestamps[r].last().map(|t| t.to_string()),
            }
        };
        Self {
            fields: ds.field_names.clone(),
            n_days: ds.n_days,
            vocab_size: ds.vocab_size(),
            min_frequency: ds.vocabulary.min_frequency(),
            train: part(Partition::Train),
            val: part(Partition::Val),
            test: part(Partition::Test),
        }
    }
}
