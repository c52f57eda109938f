//! Reference oracles shared by the integration tests and the acceptance
//! suite: central finite differences and a brute-force ECE.

#![allow(dead_code)]

use bridgenet::bridge::{BridgeKind, BridgeSpec};
use bridgenet::metrics::argmax;
use bridgenet::nn::{cross_entropy, kl_loss, softmax, ArchSpec, LayerSpec, ParameterVector};
use bridgenet::subspace::BezierCurve;
use bridgenet::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
pub const FD_INSTANCES: usize = 20;

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm, with a floor on the
/// denominator so two vanishing gradients compare equal.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    diff / scale.max(1e-8)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, normal_vec(rng, rows * cols, scale)).unwrap()
}

/// Random probability vector with all entries bounded away from zero.
pub fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Batch-mean loss of `arch` at `params` and its analytic gradient, for
/// either cross-entropy labels or soft targets.
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Soft(&'a [Vec<f64>]),
}

fn sample_loss(t: &Targets, n: usize, logits: &[f64]) -> (f64, Vec<f64>) {
    match t {
        Targets::Labels(y) => cross_entropy(logits, y[n]).unwrap(),
        Targets::Soft(p) => kl_loss(&p[n], logits).unwrap(),
    }
}

pub fn batch_loss(arch: &ArchSpec, params: &[f64], x: &Matrix, t: &Targets) -> f64 {
    let logits = arch.logits(params, x).unwrap();
    let total: f64 = (0..x.rows()).map(|n| sample_loss(t, n, logits.row(n)).0).sum();
    total / x.rows() as f64
}

pub fn batch_grad(arch: &ArchSpec, params: &[f64], x: &Matrix, t: &Targets) -> Vec<f64> {
    let results = arch.forward_batch(params, x).unwrap();
    let mut g = Matrix::zeros(x.rows(), arch.class_count());
    for (n, r) in results.iter().enumerate() {
        g.row_mut(n).copy_from_slice(&sample_loss(t, n, &r.logits).1);
    }
    arch.backward_batch(params, &results, &g).unwrap()
}

fn arch_case(arch: &ArchSpec, rng: &mut ChaCha8Rng, soft: bool) -> f64 {
    let batch = 4;
    let params = normal_vec(rng, arch.param_count(), 0.7);
    let x = normal_matrix(rng, batch, arch.input_dim(), 1.0);
    let k = arch.class_count();
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..k)).collect();
    let probs: Vec<Vec<f64>> = (0..batch).map(|_| random_simplex(rng, k)).collect();
    let t = if soft {
        Targets::Soft(&probs)
    } else {
        Targets::Labels(&labels)
    };
    let analytic = batch_grad(arch, &params, &x, &t);
    let numeric = central_diff(|p| batch_loss(arch, p, &x, &t), &params, FD_STEP);
    rel_error(&analytic, &numeric)
}

fn layer_arch(middle: Vec<LayerSpec>, width: usize) -> ArchSpec {
    let mut layers = vec![LayerSpec::dense(3, width)];
    layers.extend(middle);
    layers.push(LayerSpec::dense(width, 3));
    ArchSpec::new(3, 3, layers, 0).unwrap()
}

fn pinpoint_case(rng: &mut ChaCha8Rng) -> f64 {
    let arch = ArchSpec::residual_mlp(2, 3, 5, 1, 2).unwrap();
    let p = arch.param_count();
    let v = |rng: &mut ChaCha8Rng| ParameterVector::new(normal_vec(rng, p, 0.7)).unwrap();
    let curve = BezierCurve::new(arch.clone(), v(rng), v(rng), v(rng)).unwrap();
    let r: f64 = rng.random_range(0.05..0.95);
    let x = normal_matrix(rng, 4, 2, 1.0);
    let y: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
    let (_, analytic) = curve.pinpoint_gradient(r, &x, &y).unwrap();
    let loss_at = |be: &[f64]| {
        let c = BezierCurve::new(
            arch.clone(),
            curve.theta_i.clone(),
            curve.theta_j.clone(),
            ParameterVector::new(be.to_vec()).unwrap(),
        )
        .unwrap();
        batch_loss(&arch, c.curve_point(r).unwrap().as_slice(), &x, &Targets::Labels(&y))
    };
    let numeric = central_diff(loss_at, curve.theta_be.as_slice(), FD_STEP);
    rel_error(&analytic, &numeric)
}

fn logit_case(rng: &mut ChaCha8Rng, soft: bool) -> f64 {
    let k = rng.random_range(2..7);
    let z = normal_vec(rng, k, 2.0);
    if soft {
        let p = random_simplex(rng, k);
        let (_, g) = kl_loss(&p, &z).unwrap();
        rel_error(&g, &central_diff(|z| kl_loss(&p, z).unwrap().0, &z, FD_STEP))
    } else {
        let y = rng.random_range(0..k);
        let (_, g) = cross_entropy(&z, y).unwrap();
        rel_error(&g, &central_diff(|z| cross_entropy(z, y).unwrap().0, &z, FD_STEP))
    }
}

/// Relative errors of analytic against finite-difference gradients, one per
/// random instance, for every differentiable component.
pub fn gradient_cases(instances: usize) -> Vec<(&'static str, Vec<f64>)> {
    let run = |seed_base: u64, f: &dyn Fn(&mut ChaCha8Rng) -> f64| -> Vec<f64> {
        (0..instances as u64)
            .map(|i| f(&mut ChaCha8Rng::seed_from_u64(seed_base * 1000 + i)))
            .collect()
    };
    let dense = ArchSpec::new(3, 3, vec![LayerSpec::dense(3, 4), LayerSpec::dense(4, 3)], 0).unwrap();
    let relu = layer_arch(vec![LayerSpec::Relu], 5);
    let frn = layer_arch(vec![LayerSpec::frn(5)], 5);
    let residual = layer_arch(vec![LayerSpec::residual(4, 6)], 4);
    let trunk = BridgeSpec::new(BridgeKind::TypeII, 3, 4, 3, 0.5)
        .unwrap()
        .arch()
        .unwrap();
    vec![
        ("dense", run(1, &|r| arch_case(&dense, r, false))),
        ("relu", run(2, &|r| arch_case(&relu, r, false))),
        ("frn_tlu", run(3, &|r| arch_case(&frn, r, false))),
        ("residual_block", run(4, &|r| arch_case(&residual, r, false))),
        ("cross_entropy", run(5, &|r| logit_case(r, false))),
        ("kl_distillation", run(6, &|r| logit_case(r, true))),
        ("bridge_trunk", run(7, &|r| arch_case(&trunk, r, true))),
        ("pinpoint_chain_rule", run(8, &pinpoint_case)),
    ]
}

/// ECE by explicit bin membership: every bin scans the whole set.
pub fn ece_bruteforce(rows: &[Vec<f64>], labels: &[usize], n_bins: usize) -> f64 {
    let total = rows.len() as f64;
    let mut out = 0.0;
    for b in 0..n_bins {
        let lo = b as f64 / n_bins as f64;
        let hi = (b + 1) as f64 / n_bins as f64;
        let last = b + 1 == n_bins;
        let mut m = 0usize;
        let mut hits = 0.0;
        let mut conf = 0.0;
        for (row, &y) in rows.iter().zip(labels) {
            let pred = argmax(row);
            let c = row[pred];
            let inside = c >= lo && (c < hi || (last && c <= 1.0));
            if inside {
                m += 1;
                conf += c;
                if pred == y {
                    hits += 1.0;
                }
            }
        }
        if m > 0 {
            let n = m as f64;
            out += (n / total) * (hits / n - conf / n).abs();
        }
    }
    out
}

/// Random probability rows, some deliberately placed on bin edges.
pub fn random_prob_rows(rng: &mut ChaCha8Rng, n: usize, k: usize, n_bins: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            if k == 2 && rng.random_bool(0.2) {
                let edge = rng.random_range(n_bins / 2..=n_bins) as f64 / n_bins as f64;
                vec![edge, 1.0 - edge]
            } else {
                let logits = normal_vec(rng, k, 2.0);
                softmax(&logits).unwrap()
            }
        })
        .collect()
}
