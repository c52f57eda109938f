//! Datasets, synthetic generators, CSV persistence, splits and checkpoints.

mod checkpoint;
mod csvio;
mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, write_atomic, Checkpoint, CheckpointHeader, Role, DTYPE_TAG, FORMAT_VERSION,
    MAGIC,
};
pub use csvio::{load_csv, save_csv, to_csv_string};
pub use synth::{gen_blobs, gen_spirals, spiral_point};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    /// Number of classes.
    pub k: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, k: usize, name: impl Into<String>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!("{} rows but {} labels", x.rows(), y.len())));
        }
        if x.rows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
        }
        if !x.is_finite() {
            return Err(Error::invalid("dataset has non-finite features"));
        }
        Ok(Self {
            x,
            y,
            k,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Self {
        Self {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            k: self.k,
            name: name.into(),
        }
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.k];
        for &c in &self.y {
            h[c] += 1;
        }
        h
    }
}

/// Seeded shuffle, then contiguous train/val/test cut. Validation and test
/// sizes are `floor(N * ratio)`; the remainder goes to train.
pub fn split(data: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| r.is_nan() || *r <= 0.0) {
        return Err(Error::invalid("split ratios must be positive"));
    }
    if (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios sum to {}", tr + va + te)));
    }
    let n = data.len();
    let n_val = (n as f64 * va).floor() as usize;
    let n_test = (n as f64 * te).floor() as usize;
    let n_train = n - n_val - n_test;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::invalid(format!(
            "split of {n} samples leaves an empty part ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = &data.name;
    Ok((
        data.subset(&idx[..n_train], format!("{base}/train")),
        data.subset(&idx[n_train..n_train + n_val], format!("{base}/val")),
        data.subset(&idx[n_train + n_val..], format!("{base}/test")),
    ))
}
