use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mixup::mixup_with_rng;
use super::{BridgeKind, BridgeModel, Endpoint, MixupCfg};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::ProbMatrix;
use crate::nn::{
    check_data, check_finite_logits, cosine_lr, kl_loss, sgd_step, Minibatches, Network, OptimizerCfg, StepLog,
};
use crate::subspace::BezierCurve;

/// Teacher distribution: softmax of the curve model at `r` on `x`.
pub fn teacher_targets(curve: &BezierCurve, r: f64, x: &Matrix) -> Result<ProbMatrix> {
    curve.network_at(r)?.predict(x)
}

fn check_endpoints(
    bridge: &BridgeModel,
    base_i: &Network,
    base_j: Option<&Network>,
    curve: &BezierCurve,
) -> Result<()> {
    if bridge.curve != curve.identity() {
        return Err(Error::invalid("bridge was built for a different curve"));
    }
    let mismatch = |what: &str| Error::invalid(format!("{what} is not the matching curve endpoint"));
    match bridge.spec.kind {
        BridgeKind::TypeI => {
            if base_j.is_some() {
                return Err(Error::invalid("type I bridge takes a single base network"));
            }
            let expected = match bridge.feed {
                Some(Endpoint::A) => &curve.theta_i,
                Some(Endpoint::B) => &curve.theta_j,
                None => return Err(Error::invalid("type I bridge without feeding endpoint")),
            };
            if !base_i.params.bit_eq(expected) {
                return Err(mismatch("base network"));
            }
        }
        BridgeKind::TypeII => {
            let base_j = base_j.ok_or_else(|| Error::invalid("type II bridge needs both base networks"))?;
            if !base_i.params.bit_eq(&curve.theta_i) {
                return Err(mismatch("first base network"));
            }
            if !base_j.params.bit_eq(&curve.theta_j) {
                return Err(mismatch("second base network"));
            }
        }
    }
    if base_i.arch != curve.arch || base_i.arch.feature_dim() != bridge.spec.feature_dim {
        return Err(Error::shape("base feature dimension does not match bridge spec"));
    }
    if base_i.arch.class_count() != bridge.spec.class_count {
        return Err(Error::shape("base class count does not match bridge spec"));
    }
    Ok(())
}

/// Distills the curve model at `spec.target_r` into the bridge.
///
/// Each step: draw a minibatch, mix its inputs, take endpoint features from
/// the frozen base network(s), evaluate the teacher on the same mixed inputs,
/// and descend the batch-mean `KL(teacher || bridge)`. Only the bridge
/// parameters change. The logged loss is the pre-update batch KL.
pub fn train_bridge(
    bridge: &BridgeModel,
    base_i: &Network,
    base_j: Option<&Network>,
    curve: &BezierCurve,
    data: &Dataset,
    opt: &OptimizerCfg,
    mix: &MixupCfg,
) -> Result<(BridgeModel, Vec<StepLog>)> {
    opt.validate()?;
    mix.validate()?;
    check_endpoints(bridge, base_i, base_j, curve)?;
    check_data(&curve.arch, data)?;

    let arch = bridge.spec.arch()?;
    let teacher = curve.network_at(bridge.spec.target_r)?;
    let mut out = bridge.clone();
    let mut velocity = vec![0.0; out.params.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut mix_rng = ChaCha8Rng::seed_from_u64(mix.seed);
    let mut batches = Minibatches::new(data.len(), opt.batch_size);
    let mut log = Vec::with_capacity(opt.total_steps);

    for step in 0..opt.total_steps {
        let idx = batches.next_batch(&mut rng);
        let x = mixup_with_rng(&data.x.select_rows(&idx), mix.alpha, &mut mix_rng)?;
        let (_, z_i) = base_i.predict_with_features(&x)?;
        let z_j = base_j
            .map(|b| b.predict_with_features(&x).map(|(_, z)| z))
            .transpose()?;
        let targets = teacher.predict(&x)?;
        let input = out.fuse(&z_i, z_j.as_ref())?;

        let results = arch.forward_batch(out.params.as_slice(), &input)?;
        check_finite_logits(&results).map_err(|e| Error::Diverged(format!("bridge step {step}: {e}")))?;
        let mut grad_logits = Matrix::zeros(results.len(), arch.class_count());
        let mut total = 0.0;
        for (n, res) in results.iter().enumerate() {
            let (loss, g) = kl_loss(targets.row(n), &res.logits)?;
            total += loss;
            grad_logits.row_mut(n).copy_from_slice(&g);
        }
        let loss = total / results.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("bridge KL is {loss} at step {step}")));
        }
        let grad = arch.backward_batch(out.params.as_slice(), &results, &grad_logits)?;
        let lr = cosine_lr(step, opt)?;
        sgd_step(out.params.as_mut_slice(), &grad, &mut velocity, opt, lr)
            .map_err(|e| Error::Diverged(format!("bridge step {step}: {e}")))?;
        log.push(StepLog {
            step,
            lr,
            loss,
            r: None,
        });
    }
    Ok((out, log))
}
