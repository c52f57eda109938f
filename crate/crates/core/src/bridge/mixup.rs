//! Input-only mixup. Labels are never mixed: distillation targets come from
//! the teacher evaluated on the mixed inputs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn default_alpha() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixupCfg {
    /// Beta(alpha, alpha) concentration; 0 disables mixup.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MixupCfg {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("mixup alpha {} must be >= 0", self.alpha)));
        }
        Ok(())
    }
}

/// `lambda ~ Beta(alpha, alpha)` as `X / (X + Y)` with `X, Y ~ Gamma(alpha, 1)`.
pub fn sample_beta<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(format!("mixup alpha {alpha}: {e}")))?;
    let x = g.sample(rng);
    let y = g.sample(rng);
    let s = x + y;
    // both draws can underflow to zero for tiny alpha
    Ok(if s > 0.0 { x / s } else { 0.5 })
}

/// `lambda x + (1 - lambda) partner`.
pub fn mix_pair(x: &[f64], partner: &[f64], lambda: f64) -> Vec<f64> {
    x.iter()
        .zip(partner)
        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
        .collect()
}

/// Mixup with explicit partners and coefficients.
pub fn mixup_with(inputs: &Matrix, partners: &[usize], lambdas: &[f64]) -> Result<Matrix> {
    if partners.len() != inputs.rows() || lambdas.len() != inputs.rows() {
        return Err(Error::shape("one partner and one lambda per sample required"));
    }
    let mut out = Matrix::zeros(inputs.rows(), inputs.cols());
    for i in 0..inputs.rows() {
        let p = partners[i];
        if p >= inputs.rows() {
            return Err(Error::invalid(format!("partner index {p} out of range")));
        }
        out.row_mut(i)
            .copy_from_slice(&mix_pair(inputs.row(i), inputs.row(p), lambdas[i]));
    }
    Ok(out)
}

/// Partners from a random permutation of the batch, one lambda per sample.
/// `alpha == 0` returns the inputs unchanged and draws nothing.
pub fn mixup_with_rng<R: Rng + ?Sized>(inputs: &Matrix, alpha: f64, rng: &mut R) -> Result<Matrix> {
    if alpha == 0.0 {
        return Ok(inputs.clone());
    }
    let mut partners: Vec<usize> = (0..inputs.rows()).collect();
    partners.shuffle(rng);
    let lambdas = (0..inputs.rows())
        .map(|_| sample_beta(alpha, rng))
        .collect::<Result<Vec<_>>>()?;
    mixup_with(inputs, &partners, &lambdas)
}

pub fn mixup(inputs: &Matrix, cfg: &MixupCfg) -> Result<Matrix> {
    cfg.validate()?;
    mixup_with_rng(inputs, cfg.alpha, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}
