//! Seeded toy classification datasets.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const SPIRAL_TURNS: f64 = 1.5;
const MAX_CENTER_TRIES: usize = 10_000;

/// Noiseless point of spiral arm `class` (of `k`) at parameter `t` in `[0, 1)`.
pub fn spiral_point(class: usize, k: usize, t: f64) -> [f64; 2] {
    let radius = 0.1 + 0.9 * t;
    let angle = 2.0 * PI * class as f64 / k as f64 + 2.0 * PI * SPIRAL_TURNS * t;
    [radius * angle.cos(), radius * angle.sin()]
}

fn check_common(n_per_class: usize, k: usize, noise_std: f64) -> Result<Normal<f64>> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    if k < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::invalid("noise_std must be >= 0"));
    }
    Normal::new(0.0, noise_std).map_err(|e| Error::invalid(e.to_string()))
}

/// `k` interleaved 2-D spiral arms, `n_per_class` points each, with isotropic
/// Gaussian noise added to the coordinates.
pub fn gen_spirals(n_per_class: usize, k: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    let noise = check_common(n_per_class, k, noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(2 * n_per_class * k);
    let mut y = Vec::with_capacity(n_per_class * k);
    for c in 0..k {
        for i in 0..n_per_class {
            let t = i as f64 / n_per_class as f64;
            let [px, py] = spiral_point(c, k, t);
            data.push(px + noise.sample(&mut rng));
            data.push(py + noise.sample(&mut rng));
            y.push(c);
        }
    }
    Dataset::new(Matrix::from_vec(y.len(), 2, data)?, y, k, "spirals")
}

/// Gaussian clusters around seeded random centers whose pairwise distances
/// are all at least `separation`.
pub fn gen_blobs(
    n_per_class: usize,
    k: usize,
    d: usize,
    separation: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    let noise = check_common(n_per_class, k, noise_std)?;
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid("separation must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = separation.max(1e-9) * k as f64;
    let box_dist = Uniform::new_inclusive(-half, half).map_err(|e| Error::invalid(e.to_string()))?;

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut tries = 0;
    while centers.len() < k {
        tries += 1;
        if tries > MAX_CENTER_TRIES {
            return Err(Error::invalid(format!(
                "could not place {k} centers {separation} apart in {d} dimensions"
            )));
        }
        let cand: Vec<f64> = (0..d).map(|_| box_dist.sample(&mut rng)).collect();
        if centers.iter().all(|c| dist(c, &cand) >= separation) {
            centers.push(cand);
        }
    }

    let mut data = Vec::with_capacity(d * n_per_class * k);
    let mut y = Vec::with_capacity(n_per_class * k);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            data.extend(center.iter().map(|m| m + noise.sample(&mut rng)));
            y.push(c);
        }
    }
    Dataset::new(Matrix::from_vec(y.len(), d, data)?, y, k, "blobs")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}
