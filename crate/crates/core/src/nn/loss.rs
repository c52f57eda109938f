//! Softmax and the two training losses. Both losses return the gradient with
//! respect to the logits, which is `softmax(logits) - target` in each case.

use crate::error::{Error, Result};

/// Tolerance on `sum(target) == 1` accepted by [`kl_loss`].
pub const TARGET_NORM_TOL: f64 = 1e-9;

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "softmax input {i} is not finite ({})",
            logits[i]
        )));
    }
    Ok(softmax_unchecked(logits))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let mut grad = softmax(logits)?;
    let loss = -log_softmax(logits)[label];
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// `KL(target || softmax(pred_logits))`.
pub fn kl_loss(target: &[f64], pred_logits: &[f64]) -> Result<(f64, Vec<f64>)> {
    if target.len() != pred_logits.len() {
        return Err(Error::shape(format!(
            "target has {} classes, logits {}",
            target.len(),
            pred_logits.len()
        )));
    }
    if target.iter().any(|&t| t.is_nan() || t < 0.0) {
        return Err(Error::invalid("target has negative or NaN entries"));
    }
    let total: f64 = target.iter().sum();
    if (total - 1.0).abs() > TARGET_NORM_TOL {
        return Err(Error::invalid(format!("target sums to {total}, not 1")));
    }
    let mut grad = softmax(pred_logits)?;
    let logp = log_softmax(pred_logits);
    let loss: f64 = target
        .iter()
        .zip(&logp)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &lp)| t * (t.ln() - lp))
        .sum();
    for (g, &t) in grad.iter_mut().zip(target) {
        *g -= t;
    }
    Ok((loss.max(0.0), grad))
}
