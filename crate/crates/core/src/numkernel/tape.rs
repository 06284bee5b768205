use crate::{Error, Result};

/// What a layer saved during forward for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Dense { input: Vec<f64> },
    Relu { input: Vec<f64> },
    Embedding { indices: Vec<u32> },
    Fm { fields: Vec<f64>, dim: usize },
    Cross { x0: Vec<f64>, xl: Vec<f64>, dot: f64 },
}

impl Record {
    fn kind(&self) -> &'static str {
        match self {
            Record::Dense { .. } => "dense",
            Record::Relu { .. } => "relu",
            Record::Embedding { .. } => "embedding",
            Record::Fm { .. } => "fm",
            Record::Cross { .. } => "cross",
        }
    }
}

/// LIFO record of layer activations.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    records: Vec<Record>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn pop(&mut self) -> Result<Record> {
        self.records
            .pop()
            .ok_or_else(|| Error::Internal("backward called on an empty tape".into()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }
}

pub(super) fn mismatch(expected: &str, got: &Record) -> Error {
    Error::Internal(format!(
        "tape out of order: expected a {expected} record, found {}",
        got.kind()
    ))
}
