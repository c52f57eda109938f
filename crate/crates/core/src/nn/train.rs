use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::ArchSpec;
use super::forward::ForwardResult;
use super::loss::cross_entropy;
use super::network::Network;
use super::optim::{cosine_lr, sgd_step, OptimizerCfg};
use super::params::ParameterVector;
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One row of a training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    /// Curve position sampled for this step (curve training only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

/// Endless stream of minibatch indices; reshuffled at every epoch boundary.
pub(crate) struct Minibatches {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl Minibatches {
    pub(crate) fn new(n: usize, batch: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            batch: batch.min(n).max(1),
        }
    }

    pub(crate) fn next_batch(&mut self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// Mean cross-entropy over a batch and its logit gradients.
pub(crate) fn ce_batch(logits: &[Vec<f64>], labels: &[usize]) -> Result<(f64, Matrix)> {
    let k = logits.first().map_or(0, Vec::len);
    let mut grads = Matrix::zeros(logits.len(), k);
    let mut total = 0.0;
    for (i, (l, &y)) in logits.iter().zip(labels).enumerate() {
        let (loss, g) = cross_entropy(l, y)?;
        total += loss;
        grads.row_mut(i).copy_from_slice(&g);
    }
    Ok((total / logits.len() as f64, grads))
}

pub(crate) fn check_data(arch: &ArchSpec, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.x.cols() != arch.input_dim() {
        return Err(Error::shape(format!(
            "dataset has {} features, architecture expects {}",
            data.x.cols(),
            arch.input_dim()
        )));
    }
    if data.k > arch.class_count() {
        return Err(Error::shape(format!(
            "dataset has {} classes, architecture outputs {}",
            data.k,
            arch.class_count()
        )));
    }
    Ok(())
}

/// Trains one mode from a fresh seeded initialization with cross-entropy,
/// momentum SGD and a cosine schedule. Runs exactly `cfg.total_steps` steps.
pub fn train_network(arch: &ArchSpec, data: &Dataset, cfg: &OptimizerCfg) -> Result<(Network, Vec<StepLog>)> {
    cfg.validate()?;
    check_data(arch, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ParameterVector::init(arch, &mut rng);
    let mut velocity = vec![0.0; params.len()];
    let mut batches = Minibatches::new(data.len(), cfg.batch_size);
    let mut log = Vec::with_capacity(cfg.total_steps);

    for step in 0..cfg.total_steps {
        let idx = batches.next_batch(&mut rng);
        let x = data.x.select_rows(&idx);
        let y: Vec<usize> = idx.iter().map(|&i| data.y[i]).collect();
        let results = arch.forward_batch(params.as_slice(), &x)?;
        check_finite_logits(&results).map_err(|e| Error::Diverged(format!("step {step}: {e}")))?;
        let logits: Vec<Vec<f64>> = results.iter().map(|r| r.logits.clone()).collect();
        let (loss, grad_logits) = ce_batch(&logits, &y)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("loss is {loss} at step {step}")));
        }
        let grad = arch.backward_batch(params.as_slice(), &results, &grad_logits)?;
        let lr = cosine_lr(step, cfg)?;
        sgd_step(params.as_mut_slice(), &grad, &mut velocity, cfg, lr)
            .map_err(|e| Error::Diverged(format!("step {step}: {e}")))?;
        log.push(StepLog {
            step,
            lr,
            loss,
            r: None,
        });
    }
    Ok((Network::new(arch.clone(), params)?, log))
}

/// Non-finite logits during training mean the parameters have blown up.
pub(crate) fn check_finite_logits(results: &[ForwardResult]) -> Result<()> {
    match results.iter().position(|r| r.logits.iter().any(|v| !v.is_finite())) {
        Some(n) => Err(Error::Diverged(format!("non-finite logits for batch row {n}"))),
        None => Ok(()),
    }
}

/// Mean cross-entropy of `params` over the whole dataset.
pub fn mean_loss(arch: &ArchSpec, params: &[f64], data: &Dataset) -> Result<f64> {
    check_data(arch, data)?;
    let results = arch.forward_batch(params, &data.x)?;
    let logits: Vec<Vec<f64>> = results.into_iter().map(|r| r.logits).collect();
    Ok(ce_batch(&logits, &data.y)?.0)
}
