use super::check_len;
use super::tape::{mismatch, Record, Tape};
use crate::Result;

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

pub fn relu_forward(x: &[f64], tape: &mut Tape) -> Vec<f64> {
    tape.push(Record::Relu { input: x.to_vec() });
    relu(x)
}

/// Masks `upstream` where the recorded input was `<= 0` (gradient at 0 is 0).
pub fn relu_backward(tape: &mut Tape, upstream: &[f64]) -> Result<Vec<f64>> {
    let input = match tape.pop()? {
        Record::Relu { input } => input,
        other => return Err(mismatch("relu", &other)),
    };
    check_len("relu upstream", input.len(), upstream.len())?;
    Ok(input
        .iter()
        .zip(upstream)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect())
}

/// Largest `f64` below 1.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, evaluated on the branch that cannot overflow. The
/// result stays strictly inside `(0, 1)` even where the exact value rounds
/// to an endpoint.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu(&[-3.0, -0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_gradient_at_zero_is_zero() {
        let mut tape = Tape::new();
        relu_forward(&[0.0, 1.0, -1.0], &mut tape);
        assert_eq!(relu_backward(&mut tape, &[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 5.0, 0.0]);
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        let hi = sigmoid(1e3);
        assert!(hi.is_finite() && hi < 1.0 && hi > 1.0 - 1e-12);
        let lo = sigmoid(-1e3);
        assert!(lo.is_finite() && lo > 0.0);
        for z in [0.1, 1.0, 3.7, 15.0] {
            assert!((sigmoid(-z) - (1.0 - sigmoid(z))).abs() < 1e-15);
        }
    }
}
