use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    5e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerCfg {
    pub base_lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub total_steps: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl OptimizerCfg {
    pub fn new(base_lr: f64, total_steps: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            base_lr,
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            total_steps,
            batch_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::InvalidConfig("base_lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        if self.total_steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("total_steps and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
/// `v' = mu v + g + wd theta`, `theta' = theta - lr v'`.
///
/// Nothing is written back unless every updated value is finite.
pub fn sgd_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], cfg: &OptimizerCfg, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::shape(format!(
            "sgd_step lengths differ: params {}, grads {}, velocity {}",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    let mut new_v = Vec::with_capacity(params.len());
    let mut new_p = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let v = cfg.momentum * velocity[i] + grads[i] + cfg.weight_decay * params[i];
        let p = params[i] - lr * v;
        if !(v.is_finite() && p.is_finite()) {
            return Err(Error::Diverged(format!(
                "non-finite update at parameter {i} (grad {})",
                grads[i]
            )));
        }
        new_v.push(v);
        new_p.push(p);
    }
    velocity.copy_from_slice(&new_v);
    params.copy_from_slice(&new_p);
    Ok(())
}

/// `base_lr * 0.5 * (1 + cos(pi * step / T))`.
pub fn cosine_lr(step: usize, cfg: &OptimizerCfg) -> Result<f64> {
    if step > cfg.total_steps {
        return Err(Error::invalid(format!(
            "step {step} beyond schedule length {}",
            cfg.total_steps
        )));
    }
    let frac = step as f64 / cfg.total_steps as f64;
    Ok(cfg.base_lr * 0.5 * (1.0 + (PI * frac).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(momentum: f64, wd: f64) -> OptimizerCfg {
        OptimizerCfg {
            momentum,
            weight_decay: wd,
            ..OptimizerCfg::new(0.1, 10, 4, 0)
        }
    }

    #[test]
    fn plain_sgd() {
        let mut p = [1.0, -2.0];
        let mut v = [0.0, 0.0];
        sgd_step(&mut p, &[0.5, 1.0], &mut v, &cfg(0.0, 0.0), 0.1).unwrap();
        assert_eq!(p, [1.0 - 0.05, -2.0 - 0.1]);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = [1.5];
        let mut v = [0.0];
        sgd_step(&mut p, &[0.0], &mut v, &cfg(0.9, 0.0), 0.1).unwrap();
        assert_eq!(p, [1.5]);
    }

    #[test]
    fn momentum_and_decay() {
        let mut p = [1.0];
        let mut v = [1.0];
        sgd_step(&mut p, &[1.0], &mut v, &cfg(0.9, 0.1), 0.1).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-15);
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn non_finite_update_aborts_without_writing() {
        let mut p = [1.0];
        let mut v = [0.0];
        let err = sgd_step(&mut p, &[f64::INFINITY], &mut v, &cfg(0.9, 0.0), 0.1);
        assert!(matches!(err, Err(Error::Diverged(_))));
        assert_eq!(p, [1.0]);
    }

    #[test]
    fn cosine_schedule() {
        let c = cfg(0.9, 0.0);
        assert_eq!(cosine_lr(0, &c).unwrap(), 0.1);
        assert!(cosine_lr(10, &c).unwrap().abs() < 1e-17);
        assert!((cosine_lr(5, &c).unwrap() - 0.05).abs() < 1e-15);
        assert!(cosine_lr(11, &c).is_err());
    }

    #[test]
    fn validate_rejects_bad_momentum() {
        assert!(cfg(1.0, 0.0).validate().is_err());
        assert!(cfg(0.9, 0.0).validate().is_ok());
    }
}
