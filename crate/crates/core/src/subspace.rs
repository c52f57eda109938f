//! Quadratic Bezier curves between two modes in parameter space:
//!
//! `theta(r) = (1 - r)^2 theta_i + 2 r (1 - r) theta_be + r^2 theta_j`, `r in [0, 1]`.
//!
//! Only the pin-point `theta_be` is trained. Each step samples one
//! `r ~ U(0, 1)` per minibatch and descends the loss at `theta(r)`; by the
//! chain rule the pin-point gradient is `2 r (1 - r)` times the loss gradient
//! at `theta(r)`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bridge::CurveIdentity;
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{self, ProbMatrix};
use crate::nn::{
    ce_batch, check_data, check_finite_logits, cosine_lr, sgd_step, softmax_rows, ArchSpec, Minibatches, Network,
    OptimizerCfg, ParameterVector, StepLog,
};

#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    pub arch: ArchSpec,
    pub theta_i: ParameterVector,
    pub theta_j: ParameterVector,
    pub theta_be: ParameterVector,
}

fn check_r(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("curve position r = {r} outside [0, 1]")));
    }
    Ok(())
}

/// Curve whose pin-point is the segment midpoint, i.e. the straight line
/// from `theta_i` to `theta_j`.
pub fn init_pinpoint(arch: &ArchSpec, theta_i: &ParameterVector, theta_j: &ParameterVector) -> Result<BezierCurve> {
    if theta_i.len() != theta_j.len() {
        return Err(Error::shape(format!(
            "endpoint lengths differ: {} vs {}",
            theta_i.len(),
            theta_j.len()
        )));
    }
    let mid: Vec<f64> = theta_i
        .as_slice()
        .iter()
        .zip(theta_j.as_slice())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    BezierCurve::new(
        arch.clone(),
        theta_i.clone(),
        theta_j.clone(),
        ParameterVector::new(mid)?,
    )
}

impl BezierCurve {
    pub fn new(
        arch: ArchSpec,
        theta_i: ParameterVector,
        theta_j: ParameterVector,
        theta_be: ParameterVector,
    ) -> Result<Self> {
        let p = arch.param_count();
        for (name, v) in [("theta_i", &theta_i), ("theta_j", &theta_j), ("theta_be", &theta_be)] {
            if v.len() != p {
                return Err(Error::shape(format!(
                    "{name} has {} entries, architecture needs {p}",
                    v.len()
                )));
            }
        }
        Ok(Self {
            arch,
            theta_i,
            theta_j,
            theta_be,
        })
    }

    /// Straight-segment curve between two trained modes.
    pub fn between(a: &Network, b: &Network) -> Result<Self> {
        if a.arch != b.arch {
            return Err(Error::shape("modes have different architectures"));
        }
        init_pinpoint(&a.arch, &a.params, &b.params)
    }

    pub fn identity(&self) -> CurveIdentity {
        CurveIdentity {
            mode_a: self.theta_i.fingerprint(),
            mode_b: self.theta_j.fingerprint(),
        }
    }

    pub fn endpoint_i(&self) -> Network {
        Network {
            arch: self.arch.clone(),
            params: self.theta_i.clone(),
        }
    }

    pub fn endpoint_j(&self) -> Network {
        Network {
            arch: self.arch.clone(),
            params: self.theta_j.clone(),
        }
    }

    /// Parameters at position `r`; the endpoints are returned bit-for-bit.
    pub fn curve_point(&self, r: f64) -> Result<ParameterVector> {
        check_r(r)?;
        if r == 0.0 {
            return Ok(self.theta_i.clone());
        }
        if r == 1.0 {
            return Ok(self.theta_j.clone());
        }
        ParameterVector::new(bezier_combine(
            self.theta_i.as_slice(),
            self.theta_be.as_slice(),
            self.theta_j.as_slice(),
            r,
        ))
    }

    pub fn network_at(&self, r: f64) -> Result<Network> {
        Ok(Network {
            arch: self.arch.clone(),
            params: self.curve_point(r)?,
        })
    }

    /// Mean cross-entropy on a batch at `theta(r)` and its gradient with
    /// respect to the pin-point.
    pub fn pinpoint_gradient(&self, r: f64, x: &Matrix, y: &[usize]) -> Result<(f64, Vec<f64>)> {
        let theta = self.curve_point(r)?;
        let results = self.arch.forward_batch(theta.as_slice(), x)?;
        check_finite_logits(&results)?;
        let logits: Vec<Vec<f64>> = results.iter().map(|res| res.logits.clone()).collect();
        let (loss, grad_logits) = ce_batch(&logits, y)?;
        let coef = 2.0 * r * (1.0 - r);
        let mut grad = self.arch.backward_batch(theta.as_slice(), &results, &grad_logits)?;
        for g in &mut grad {
            *g *= coef;
        }
        Ok((loss, grad))
    }
}

fn bezier_combine(a: &[f64], be: &[f64], b: &[f64], r: f64) -> Vec<f64> {
    let (wa, wbe, wb) = ((1.0 - r) * (1.0 - r), 2.0 * r * (1.0 - r), r * r);
    a.iter()
        .zip(be)
        .zip(b)
        .map(|((x, m), y)| wa * x + wbe * m + wb * y)
        .collect()
}

/// Trains the pin-point with the stochastic subspace objective
/// `E_{r ~ U(0,1)} L(theta(r))`. Endpoints are never touched; weight decay
/// applies to the pin-point only. The sampled `r` is logged per step.
pub fn train_pinpoint(curve: &BezierCurve, data: &Dataset, cfg: &OptimizerCfg) -> Result<(BezierCurve, Vec<StepLog>)> {
    cfg.validate()?;
    check_data(&curve.arch, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = curve.clone();
    let mut velocity = vec![0.0; out.theta_be.len()];
    let mut batches = Minibatches::new(data.len(), cfg.batch_size);
    let mut log = Vec::with_capacity(cfg.total_steps);

    for step in 0..cfg.total_steps {
        let idx = batches.next_batch(&mut rng);
        let r: f64 = rng.random();
        let x = data.x.select_rows(&idx);
        let y: Vec<usize> = idx.iter().map(|&i| data.y[i]).collect();
        let (loss, grad) = out.pinpoint_gradient(r, &x, &y)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "curve loss is {loss} at step {step} (r = {r})"
            )));
        }
        let lr = cosine_lr(step, cfg)?;
        sgd_step(out.theta_be.as_mut_slice(), &grad, &mut velocity, cfg, lr)
            .map_err(|e| Error::Diverged(format!("curve step {step}: {e}")))?;
        log.push(StepLog {
            step,
            lr,
            loss,
            r: Some(r),
        });
    }
    Ok((out, log))
}

/// Metrics of the uniform 3-member ensemble `{theta_i, theta_j, theta(r)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanEnsemble {
    pub nll: f64,
    pub acc: f64,
    pub ece: f64,
    pub bs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveScanRow {
    pub r: f64,
    pub loss: f64,
    pub acc: f64,
    pub ensemble: Option<ScanEnsemble>,
}

/// Evaluates `grid_size` evenly spaced positions `r = k / (grid_size - 1)`.
pub fn scan_curve(curve: &BezierCurve, data: &Dataset, grid_size: usize) -> Result<Vec<CurveScanRow>> {
    if grid_size < 2 {
        return Err(Error::invalid("grid_size must be >= 2"));
    }
    check_data(&curve.arch, data)?;
    let p_i = curve.endpoint_i().predict(&data.x)?;
    let p_j = curve.endpoint_j().predict(&data.x)?;

    (0..grid_size)
        .map(|k| {
            let r = if k + 1 == grid_size {
                1.0
            } else {
                k as f64 / (grid_size - 1) as f64
            };
            let logits = curve.network_at(r)?.logits(&data.x)?;
            let rows: Vec<Vec<f64>> = logits.iter_rows().map(<[f64]>::to_vec).collect();
            let (loss, _) = ce_batch(&rows, &data.y)?;
            let probs = softmax_rows(&logits);
            let ens = ProbMatrix::average(&[&p_i, &p_j, &probs])?;
            Ok(CurveScanRow {
                r,
                loss,
                acc: metrics::accuracy(&probs, &data.y)?,
                ensemble: Some(ScanEnsemble {
                    nll: metrics::nll(&ens, &data.y)?,
                    acc: metrics::accuracy(&ens, &data.y)?,
                    ece: metrics::ece(&ens, &data.y, metrics::DEFAULT_BINS)?,
                    bs: metrics::brier(&ens, &data.y)?,
                }),
            })
        })
        .collect()
}

/// CSV with header `r,loss,acc,ens_nll,ens_acc,ens_ece,ens_bs`; ensemble
/// columns are empty when not computed.
pub fn scan_to_csv(rows: &[CurveScanRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(format!("scan csv: {e}"));
    w.write_record(["r", "loss", "acc", "ens_nll", "ens_acc", "ens_ece", "ens_bs"])
        .map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![row.r.to_string(), row.loss.to_string(), row.acc.to_string()];
        match row.ensemble {
            Some(e) => rec.extend([e.nll, e.acc, e.ece, e.bs].iter().map(f64::to_string)),
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Uniform average over the `m` modes and the `m (m - 1) / 2` curve
/// midpoints `theta_be_ij(0.5)`. `pinpoints` is keyed by mode-index pairs in
/// either order.
pub fn bezier_ensemble_predict(
    modes: &[Network],
    pinpoints: &BTreeMap<(usize, usize), ParameterVector>,
    inputs: &Matrix,
) -> Result<ProbMatrix> {
    let first = modes.first().ok_or_else(|| Error::invalid("no modes given"))?;
    if modes.iter().any(|m| m.arch != first.arch) {
        return Err(Error::shape("modes have different architectures"));
    }
    let mut members = Vec::with_capacity(modes.len() * (modes.len() + 1) / 2);
    for m in modes {
        members.push(m.predict(inputs)?);
    }
    for i in 0..modes.len() {
        for j in i + 1..modes.len() {
            let be = pinpoints
                .get(&(i, j))
                .or_else(|| pinpoints.get(&(j, i)))
                .ok_or_else(|| Error::invalid(format!("no pin-point for mode pair ({i}, {j})")))?;
            let curve = BezierCurve::new(
                first.arch.clone(),
                modes[i].params.clone(),
                modes[j].params.clone(),
                be.clone(),
            )?;
            members.push(curve.network_at(0.5)?.predict(inputs)?);
        }
    }
    let refs: Vec<&ProbMatrix> = members.iter().collect();
    ProbMatrix::average(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParameterVector {
        ParameterVector::new(v.to_vec()).unwrap()
    }

    fn toy_curve(seed: u64) -> BezierCurve {
        let arch = ArchSpec::residual_mlp(2, 2, 4, 1, 2).unwrap();
        let a = Network::init(arch.clone(), seed);
        let b = Network::init(arch.clone(), seed + 1);
        let mut c = BezierCurve::between(&a, &b).unwrap();
        c.theta_be = Network::init(arch, seed + 2).params;
        c
    }

    #[test]
    fn scalar_curve_point() {
        let arch = ArchSpec::new(
            1,
            1,
            vec![
                crate::nn::LayerSpec::Relu,
                crate::nn::LayerSpec::Dense {
                    d_in: 1,
                    d_out: 1,
                    bias: false,
                },
            ],
            0,
        )
        .unwrap();
        let c = BezierCurve::new(arch, pv(&[0.0]), pv(&[1.0]), pv(&[2.0])).unwrap();
        assert_eq!(c.curve_point(0.5).unwrap().as_slice(), &[1.25]);
        assert!(c.curve_point(-0.1).is_err());
        assert!(c.curve_point(1.5).is_err());
    }

    #[test]
    fn endpoints_are_bitwise() {
        let mut c = toy_curve(1);
        c.theta_i.as_mut_slice()[0] = -0.0;
        assert!(c.curve_point(0.0).unwrap().bit_eq(&c.theta_i));
        assert!(c.curve_point(1.0).unwrap().bit_eq(&c.theta_j));
    }

    #[test]
    fn midpoint_formula() {
        let c = toy_curve(3);
        let mid = c.curve_point(0.5).unwrap();
        for k in 0..mid.len() {
            let want = 0.25 * c.theta_i.as_slice()[k] + 0.5 * c.theta_be.as_slice()[k] + 0.25 * c.theta_j.as_slice()[k];
            assert!((mid.as_slice()[k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn midpoint_init_is_linear_segment() {
        let arch = ArchSpec::residual_mlp(2, 2, 4, 1, 2).unwrap();
        let c = init_pinpoint(
            &arch,
            &Network::init(arch.clone(), 0).params,
            &Network::init(arch.clone(), 1).params,
        )
        .unwrap();
        for k in 0..=10 {
            let r = k as f64 / 10.0;
            let p = c.curve_point(r).unwrap();
            for (idx, v) in p.as_slice().iter().enumerate() {
                let lin = (1.0 - r) * c.theta_i.as_slice()[idx] + r * c.theta_j.as_slice()[idx];
                assert!((v - lin).abs() <= 1e-15, "r={r} idx={idx}");
            }
        }
        let z = init_pinpoint(
            &arch,
            &Network::init(arch.clone(), 0).params,
            &Network::init(arch.clone(), 0).params,
        )
        .unwrap();
        assert!(z.curve_point(0.3).unwrap().linf_distance(&z.theta_i) < 1e-15);
    }

    #[test]
    fn scalar_linear_segment() {
        let arch = ArchSpec::new(
            1,
            1,
            vec![
                crate::nn::LayerSpec::Relu,
                crate::nn::LayerSpec::Dense {
                    d_in: 1,
                    d_out: 1,
                    bias: false,
                },
            ],
            0,
        )
        .unwrap();
        let c = init_pinpoint(&arch, &pv(&[0.0]), &pv(&[2.0])).unwrap();
        assert_eq!(c.theta_be.as_slice(), &[1.0]);
        assert_eq!(c.curve_point(0.25).unwrap().as_slice(), &[0.5]);
        assert!(init_pinpoint(&arch, &pv(&[0.0]), &pv(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn gradient_vanishes_at_endpoints() {
        let c = toy_curve(5);
        let x = Matrix::from_rows(&[[0.2, -0.4], [1.0, 0.3]]).unwrap();
        for r in [0.0, 1.0] {
            let (_, g) = c.pinpoint_gradient(r, &x, &[0, 1]).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ensemble_member_counts() {
        let arch = ArchSpec::residual_mlp(2, 2, 4, 1, 2).unwrap();
        let x = Matrix::from_rows(&[[0.2, -0.4]]).unwrap();
        let same = Network::init(arch.clone(), 7);
        let modes = vec![same.clone(), same.clone()];
        let mut pins = BTreeMap::new();
        pins.insert((0, 1), same.params.clone());
        let out = bezier_ensemble_predict(&modes, &pins, &x).unwrap();
        let single = same.predict(&x).unwrap();
        for (a, b) in out.row(0).iter().zip(single.row(0)) {
            assert!((a - b).abs() < 1e-15);
        }
        let modes4: Vec<Network> = (0..4).map(|s| Network::init(arch.clone(), s)).collect();
        assert!(bezier_ensemble_predict(&modes4, &pins, &x).is_err());
    }

    #[test]
    fn scan_rows_and_csv() {
        let c = toy_curve(2);
        let d = crate::dataio::gen_blobs(10, 2, 2, 3.0, 0.5, 0).unwrap();
        let rows = scan_curve(&c, &d, 5).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.windows(2).all(|w| w[0].r < w[1].r));
        assert_eq!(rows[0].r, 0.0);
        assert_eq!(rows[4].r, 1.0);
        let direct = crate::nn::mean_loss(&c.arch, c.theta_i.as_slice(), &d).unwrap();
        assert_eq!(rows[0].loss, direct);
        let csv = scan_to_csv(&rows).unwrap();
        assert!(csv.starts_with("r,loss,acc,ens_nll,ens_acc,ens_ece,ens_bs\n"));
        assert_eq!(csv.lines().count(), 6);
        assert!(scan_curve(&c, &d, 1).is_err());
    }
}
