//! Temperature scaling on final probabilities: `normalize(p^(1/T))` per row.
//! Ensembles have no single logit vector, so the power form is used for
//! single models too.

use super::{nll, ProbMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
const LN_T_TOL: f64 = 1e-4;

pub fn apply_temperature(probs: &ProbMatrix, t: f64) -> Result<ProbMatrix> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {t}")));
    }
    if t == 1.0 {
        return Ok(probs.clone());
    }
    let mut out = Matrix::zeros(probs.rows(), probs.classes());
    for (i, row) in probs.iter_rows().enumerate() {
        let scaled: Vec<f64> = row.iter().map(|&p| p.ln() / t).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dst = out.row_mut(i);
        let mut sum = 0.0;
        for (d, s) in dst.iter_mut().zip(&scaled) {
            *d = (s - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    Ok(ProbMatrix::from_normalized(out))
}

/// Temperature minimizing validation NLL: golden-section search on `ln T`
/// over `[ln T_MIN, ln T_MAX]`, then the best of the search result, both
/// bounds and `T = 1`, so the returned temperature never scores worse than
/// the unscaled predictions.
pub fn fit_temperature(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    let f = |u: f64| -> Result<f64> { nll(&apply_temperature(probs, u.exp())?, labels) };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (T_MIN.ln(), T_MAX.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > LN_T_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }

    let mut best = (0.5 * (a + b)).exp();
    let mut best_nll = f(best.ln())?;
    for t in [T_MIN, T_MAX, 1.0] {
        let v = nll(&apply_temperature(probs, t)?, labels)?;
        if v < best_nll {
            best = t;
            best_nll = v;
        }
    }
    Ok(best)
}
