use serde::{Deserialize, Serialize};

use super::tape::{mismatch, Record, Tape};
use super::check_len;
use crate::{Error, Result};

/// Row-major matrix of finite `f64`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("matrix entry {i} is not finite")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y`
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradients of a dense layer for one upstream vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub input: Vec<f64>,
}

/// `W·x + b`, recording `x` on the tape.
pub fn dense_forward(w: &DenseMatrix, b: &[f64], x: &[f64], tape: &mut Tape) -> Result<Vec<f64>> {
    check_len("dense input", w.cols, x.len())?;
    check_len("dense bias", w.rows, b.len())?;
    let mut out = w.matvec(x);
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    tape.push(Record::Dense { input: x.to_vec() });
    Ok(out)
}

/// Pops a dense record and returns fresh `(∂W, ∂b, ∂x)`.
pub fn dense_backward(w: &DenseMatrix, tape: &mut Tape, upstream: &[f64]) -> Result<DenseGrads> {
    let mut weight = DenseMatrix::zeros(w.rows, w.cols);
    let mut bias = vec![0.0; w.rows];
    let input = dense_backward_into(w, tape, upstream, weight.data_mut(), &mut bias)?;
    Ok(DenseGrads {
        weight,
        bias,
        input,
    })
}

/// Like [`dense_backward`] but adds `∂W` and `∂b` into caller-owned
/// accumulators. Returns `∂x`.
pub fn dense_backward_into(
    w: &DenseMatrix,
    tape: &mut Tape,
    upstream: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Result<Vec<f64>> {
    let input = match tape.pop()? {
        Record::Dense { input } => input,
        other => return Err(mismatch("dense", &other)),
    };
    check_len("dense upstream", w.rows, upstream.len())?;
    check_len("dense weight gradient", w.rows * w.cols, grad_w.len())?;
    check_len("dense bias gradient", w.rows, grad_b.len())?;
    for (r, &g) in upstream.iter().enumerate() {
        grad_b[r] += g;
        if g == 0.0 {
            continue;
        }
        let row = &mut grad_w[r * w.cols..(r + 1) * w.cols];
        for (gw, xi) in row.iter_mut().zip(&input) {
            *gw += g * xi;
        }
    }
    Ok(w.matvec_t(upstream))
}
