use super::check_len;
use super::dense::dot;
use super::tape::{mismatch, Record, Tape};
use crate::{Error, Result};

/// Sum of pairwise inner products `Σ_{i<j} ⟨e_i, e_j⟩`, evaluated per
/// dimension as `½[(Σ e)² − Σ e²]`.
pub fn fm_interaction(fields: &[&[f64]]) -> Result<f64> {
    if fields.len() < 2 {
        return Err(Error::config(format!(
            "FM interaction needs at least 2 fields, got {}",
            fields.len()
        )));
    }
    let dim = fields[0].len();
    for f in fields {
        check_len("FM field embedding", dim, f.len())?;
    }
    let mut total = 0.0;
    for k in 0..dim {
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for f in fields {
            sum += f[k];
            sum_sq += f[k] * f[k];
        }
        total += sum * sum - sum_sq;
    }
    Ok(0.5 * total)
}

/// FM term over a concatenated embedding vector of `dim`-sized chunks.
pub fn fm_forward(concat: &[f64], dim: usize, tape: &mut Tape) -> Result<f64> {
    if dim == 0 || !concat.len().is_multiple_of(dim) {
        return Err(Error::config(format!(
            "FM input of length {} is not a multiple of dim {dim}",
            concat.len()
        )));
    }
    let fields: Vec<&[f64]> = concat.chunks_exact(dim).collect();
    let value = fm_interaction(&fields)?;
    tape.push(Record::Fm {
        fields: concat.to_vec(),
        dim,
    });
    Ok(value)
}

/// Gradient w.r.t. the concatenated input: `∂/∂e_ik = upstream·(Σ_j e_jk − e_ik)`.
pub fn fm_backward(tape: &mut Tape, upstream: f64) -> Result<Vec<f64>> {
    let (fields, dim) = match tape.pop()? {
        Record::Fm { fields, dim } => (fields, dim),
        other => return Err(mismatch("fm", &other)),
    };
    let mut sums = vec![0.0; dim];
    for chunk in fields.chunks_exact(dim) {
        for (s, v) in sums.iter_mut().zip(chunk) {
            *s += v;
        }
    }
    Ok(fields
        .iter()
        .enumerate()
        .map(|(i, e)| upstream * (sums[i % dim] - e))
        .collect())
}

/// One DCN cross layer: `x0·(xlᵀw) + b + xl`.
pub fn cross_layer(x0: &[f64], xl: &[f64], w: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    cross_forward(x0, xl, w, b, &mut Tape::new())
}

pub fn cross_forward(
    x0: &[f64],
    xl: &[f64],
    w: &[f64],
    b: &[f64],
    tape: &mut Tape,
) -> Result<Vec<f64>> {
    let n = x0.len();
    check_len("cross xl", n, xl.len())?;
    check_len("cross weight", n, w.len())?;
    check_len("cross bias", n, b.len())?;
    let s = dot(xl, w);
    let out = (0..n).map(|i| x0[i] * s + b[i] + xl[i]).collect();
    tape.push(Record::Cross {
        x0: x0.to_vec(),
        xl: xl.to_vec(),
        dot: s,
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub x0: Vec<f64>,
    pub xl: Vec<f64>,
}

pub fn cross_backward(w: &[f64], tape: &mut Tape, upstream: &[f64]) -> Result<CrossGrads> {
    let (x0, xl, s) = match tape.pop()? {
        Record::Cross { x0, xl, dot } => (x0, xl, dot),
        other => return Err(mismatch("cross", &other)),
    };
    check_len("cross upstream", x0.len(), upstream.len())?;
    check_len("cross weight", x0.len(), w.len())?;
    // gradient flowing into the scalar s = xl·w
    let gs = dot(upstream, &x0);
    Ok(CrossGrads {
        weight: xl.iter().map(|v| gs * v).collect(),
        bias: upstream.to_vec(),
        x0: upstream.iter().map(|g| g * s).collect(),
        xl: upstream.iter().zip(w).map(|(g, wi)| g + gs * wi).collect(),
    })
}
