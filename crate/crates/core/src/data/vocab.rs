use std::collections::HashMap;

use crate::{Error, Result};

/// Index shared by every value that is unseen or below the frequency threshold.
pub const OOV_INDEX: u32 = 0;

/// `(field, value) → index` over one shared index space. Indices start at 1
/// in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    min_frequency: u32,
    /// Per-field value maps.
    index: Vec<HashMap<String, u32>>,
    entries: Vec<(u32, String)>,
}

impl Vocabulary {
    pub fn min_frequency(&self) -> u32 {
        self.min_frequency
    }

    /// Table size including the OOV row.
    pub fn size(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn lookup(&self, field: usize, value: &str) -> u32 {
        self.index
            .get(field)
            .and_then(|m| m.get(value))
            .copied()
            .unwrap_or(OOV_INDEX)
    }

    pub fn encode(&self, values: &[String]) -> Vec<u32> {
        values
            .iter()
            .enumerate()
            .map(|(f, v)| self.lookup(f, v))
            .collect()
    }

    /// `(field, value)` for each non-OOV index, starting at index 1.
    pub fn entries(&self) -> &[(u32, String)] {
        &self.entries
    }

    /// One `index\tfield\tvalue` line per entry.
    pub fn to_tsv(&self, field_names: &[String]) -> String {
        let mut out = String::from("index\tfield\tvalue\n");
        for (i, (f, v)) in self.entries.iter().enumerate() {
            let name = field_names.get(*f as usize).map(String::as_str).unwrap_or("?");
            out.push_str(&format!("{}\t{name}\t{v}\n", i + 1));
        }
        out
    }
}

/// Assigns indices to every `(field, value)` seen at least `min_frequency`
/// times in `rows`, in order of first occurrence (row-major, field order).
pub fn build_vocab<R: AsRef<[String]>>(rows: &[R], min_frequency: u32) -> Result<Vocabulary> {
    if min_frequency < 1 {
        return Err(Error::config("min_frequency must be at least 1"));
    }
    let mut counts: HashMap<(u32, &str), u32> = HashMap::new();
    for row in rows {
        for (f, v) in row.as_ref().iter().enumerate() {
            *counts.entry((f as u32, v.as_str())).or_default() += 1;
        }
    }
    let mut vocab = Vocabulary {
        min_frequency,
        ..Vocabulary::default()
    };
    for row in rows {
        for (f, v) in row.as_ref().iter().enumerate() {
            if counts[&(f as u32, v.as_str())] < min_frequency {
                continue;
            }
            if vocab.index.len() <= f {
                vocab.index.resize_with(f + 1, HashMap::new);
            }
            if vocab.index[f].contains_key(v) {
                continue;
            }
            let idx = vocab.entries.len() as u32 + 1;
            vocab.index[f].insert(v.clone(), idx);
            vocab.entries.push((f as u32, v.clone()));
        }
    }
    Ok(vocab)
}
