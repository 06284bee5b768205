use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{mismatch, Record, Tape};
use super::{check_len, init_uniform};
use crate::{Error, Result};

/// `vocab_size × dim` lookup table. Row 0 is the out-of-vocabulary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    vocab_size: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            vocab_size,
            dim,
            data: vec![0.0; vocab_size * dim],
        }
    }

    pub fn random<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            vocab_size,
            dim,
            data: init_uniform(rng, vocab_size * dim),
        }
    }

    pub fn from_data(vocab_size: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        check_len("embedding table", vocab_size * dim, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("embedding table has non-finite entries"));
        }
        Ok(Self {
            vocab_size,
            dim,
            data,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.dim..(index + 1) * self.dim]
    }

    fn check_index(&self, index: u32) -> Result<()> {
        if index as usize >= self.vocab_size {
            return Err(Error::data(format!(
                "feature index {index} out of range for vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// Gradient buffer for an embedding table that remembers which rows were touched.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGrad {
    dim: usize,
    values: Vec<f64>,
    touched: Vec<bool>,
    rows: Vec<u32>,
}

impl RowGrad {
    pub fn new(vocab_size: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; vocab_size * dim],
            touched: vec![false; vocab_size],
            rows: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_row(&mut self, index: u32, grad: &[f64]) {
        let i = index as usize;
        if !self.touched[i] {
            self.touched[i] = true;
            self.rows.push(index);
        }
        for (v, g) in self.values[i * self.dim..(i + 1) * self.dim].iter_mut().zip(grad) {
            *v += g;
        }
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    /// Dense view of the whole buffer; untouched rows are exactly zero.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Touched rows in ascending order.
    pub fn touched_rows(&mut self) -> &[u32] {
        self.rows.sort_unstable();
        &self.rows
    }

    pub fn is_touched(&self, index: usize) -> bool {
        self.touched[index]
    }

    pub fn scale(&mut self, factor: f64) {
        for &r in &self.rows {
            let r = r as usize;
            for v in &mut self.values[r * self.dim..(r + 1) * self.dim] {
                *v *= factor;
            }
        }
    }

    /// Zeroes touched rows only.
    pub fn clear(&mut self) {
        for &r in &self.rows {
            let r = r as usize;
            self.touched[r] = false;
            self.values[r * self.dim..(r + 1) * self.dim].fill(0.0);
        }
        self.rows.clear();
    }
}

/// Concatenates the rows selected by `indices`, in order.
pub fn embedding_forward(table: &EmbeddingTable, indices: &[u32], tape: &mut Tape) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(indices.len() * table.dim);
    for &i in indices {
        table.check_index(i)?;
        out.extend_from_slice(table.row(i as usize));
    }
    tape.push(Record::Embedding {
        indices: indices.to_vec(),
    });
    Ok(out)
}

/// Scatters `upstream` (one `dim` chunk per looked-up index) into `grad`.
pub fn embedding_backward(tape: &mut Tape, upstream: &[f64], grad: &mut RowGrad) -> Result<()> {
    let indices = match tape.pop()? {
        Record::Embedding { indices } => indices,
        other => return Err(mismatch("embedding", &other)),
    };
    check_len("embedding upstream", indices.len() * grad.dim, upstream.len())?;
    for (&i, chunk) in indices.iter().zip(upstream.chunks_exact(grad.dim)) {
        grad.add_row(i, chunk);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_data(4, 2, vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap()
    }

    #[test]
    fn oov_row_lookup() {
        assert_eq!(embedding_forward(&table(), &[0], &mut Tape::new()).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn concatenates_in_field_order() {
        let out = embedding_forward(&table(), &[3, 1], &mut Tape::new()).unwrap();
        assert_eq!(out, vec![5.0, 6.0, 1.0, 2.0]);
    }

    #[test]
    fn out_of_range_is_data_error() {
        let err = embedding_forward(&table(), &[4], &mut Tape::new()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn backward_touches_selected_rows_only() {
        let t = table();
        let mut tape = Tape::new();
        embedding_forward(&t, &[1, 3, 1], &mut tape).unwrap();
        let mut grad = RowGrad::new(4, 2);
        embedding_backward(&mut tape, &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5], &mut grad).unwrap();
        assert_eq!(grad.row(0), &[0.0, 0.0]);
        assert_eq!(grad.row(2), &[0.0, 0.0]);
        assert_eq!(grad.row(1), &[1.5, 1.5]);
        assert_eq!(grad.row(3), &[2.0, 2.0]);
        assert_eq!(grad.touched_rows(), &[1, 3]);
        grad.clear();
        assert!(grad.values().iter().all(|v| *v == 0.0));
        assert!(grad.touched_rows().is_empty());
    }
}
