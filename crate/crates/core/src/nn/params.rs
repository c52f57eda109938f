use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arch::{ArchSpec, LayerSpec};
use crate::error::{Error, Result};

/// Flat vector of every trainable scalar of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Glorot-uniform dense weights, zero biases, FRN `gamma = 1`, `beta = tau = 0`.
    pub fn init<R: Rng + ?Sized>(arch: &ArchSpec, rng: &mut R) -> Self {
        let mut p = vec![0.0; arch.param_count()];
        for (layer, slot) in arch.layers().iter().zip(arch.slots()) {
            let s = &mut p[slot.offset..slot.offset + slot.len];
            match *layer {
                LayerSpec::Dense { d_in, d_out, .. } => init_dense(&mut s[..d_in * d_out], d_in, d_out, rng),
                LayerSpec::Relu => {}
                LayerSpec::Frn { width, .. } => s[..width].fill(1.0),
                LayerSpec::Residual { width, hidden, .. } => {
                    let a = width * hidden;
                    init_dense(&mut s[..a], width, hidden, rng);
                    let frn = a + hidden;
                    s[frn..frn + hidden].fill(1.0);
                    let b = frn + 3 * hidden;
                    init_dense(&mut s[b..b + hidden * width], hidden, width, rng);
                }
            }
        }
        Self(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Largest absolute elementwise difference.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Short content hash identifying a trained mode.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.0 {
            h.update(v.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn init_dense<R: Rng + ?Sized>(w: &mut [f64], d_in: usize, d_out: usize, rng: &mut R) {
    let limit = (6.0 / (d_in + d_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
    for v in w {
        *v = dist.sample(rng);
    }
}
