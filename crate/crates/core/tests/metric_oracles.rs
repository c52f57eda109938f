mod common;

use bridgenet::metrics::*;
use common::{ece_bruteforce, random_prob_rows};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ece_equals_bruteforce_binning_exactly() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=200);
        let k = rng.random_range(2..=5);
        let rows = random_prob_rows(&mut rng, n, k, DEFAULT_BINS);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let probs = ProbMatrix::from_rows(&rows).unwrap();
        let fast = ece(&probs, &labels, DEFAULT_BINS).unwrap();
        let slow = ece_bruteforce(&rows, &labels, DEFAULT_BINS);
        assert_eq!(fast.to_bits(), slow.to_bits(), "seed {seed}: {fast} vs {slow}");
    }
}

#[test]
fn ece_hand_binning() {
    let p = ProbMatrix::from_rows(&[[0.9, 0.1], [0.8, 0.2]]).unwrap();
    assert!((ece(&p, &[0, 1], 15).unwrap() - 0.45).abs() < 1e-15);
}

#[test]
fn dee_knots_and_segments() {
    let base = DEEBaseline::new(vec![(1, 1.0), (2, 0.8), (3, 0.7)]).unwrap();
    for (m, v) in base.points().collect::<Vec<_>>() {
        assert_eq!(dee(v, &base).unwrap(), m as f64);
    }
    let close = |q: f64, want: f64| assert!((dee(q, &base).unwrap() - want).abs() < 1e-12, "{q}");
    close(0.8, 2.0);
    close(0.9, 1.5);
    close(0.65, 3.5);
    close(1.1, 0.5);
    assert_eq!(dee(5.0, &base).unwrap(), 0.0);
    assert!(DEEBaseline::new(vec![(1, 1.0)]).is_err());
}

#[test]
fn r2_and_kl_hand_cases() {
    let t = ProbMatrix::from_rows(&[[0.2, 0.8], [0.6, 0.4]]).unwrap();
    let p = ProbMatrix::from_rows(&[[0.3, 0.7], [0.5, 0.5]]).unwrap();
    assert!((r2_score(&t, &p).unwrap() - 0.8).abs() < 1e-12);
    assert!((r2_score(&t, &t).unwrap() - 1.0).abs() < 1e-12);
    let flat = ProbMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
    assert!(r2_score(&t, &flat).unwrap().abs() < 1e-12);

    let one = ProbMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
    let half = ProbMatrix::from_rows(&[[0.5, 0.5]]).unwrap();
    assert!((mean_kl(&one, &half).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    assert!(mean_kl(&t, &t).unwrap().abs() < 1e-12);
}

#[test]
fn temperature_never_hurts_validation_nll_or_argmax() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(5..=150);
        let k = rng.random_range(2..=5);
        let sharp: f64 = rng.random_range(0.2..5.0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z = common::normal_vec(&mut rng, k, sharp);
                bridgenet::nn::softmax(&z).unwrap()
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let p = ProbMatrix::from_rows(&rows).unwrap();
        let t = fit_temperature(&p, &labels).unwrap();
        let q = apply_temperature(&p, t).unwrap();
        assert!(
            nll(&q, &labels).unwrap() <= nll(&p, &labels).unwrap() + 1e-12,
            "seed {seed}"
        );
        for (a, b) in p.iter_rows().zip(q.iter_rows()) {
            assert_eq!(argmax(a), argmax(b));
        }
    }
}

#[test]
fn confident_correct_validation_hits_lower_bound() {
    let p = ProbMatrix::from_rows(&[[0.9, 0.1], [0.2, 0.8], [0.95, 0.05]]).unwrap();
    assert_eq!(fit_temperature(&p, &[0, 1, 0]).unwrap(), T_MIN);
}

#[test]
fn eval_report_has_fixed_keys() {
    let p = ProbMatrix::from_rows(&[[0.7, 0.3], [0.4, 0.6], [0.9, 0.1]]).unwrap();
    let report = evaluate_calibrated(&p, &[0, 1, 1], &p, &[0, 1, 1], DEFAULT_BINS, None).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|s| s.as_str()).collect();
    keys.sort();
    assert_eq!(keys, ["acc", "bs", "dee", "ece", "n", "nll", "temperature"]);
    assert!(json["dee"].is_null());
}
