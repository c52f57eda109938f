//! Accuracy, NLL, Brier score and ECE over probability matrices, temperature
//! scaling, the deep-ensemble-equivalent score and the output-correspondence
//! measures used to compare bridges against their teachers.
//!
//! Every metric is a mean over samples accumulated in ascending sample order.

mod calibration;
mod correspondence;
mod dee;

use serde::{Deserialize, Serialize};

pub use calibration::{apply_temperature, fit_temperature, T_MAX, T_MIN};
pub use correspondence::{
    correspondence_report, mean_kl, r2_score, CorrespondenceReport, CorrespondenceRow, MATCH_BRIDGE, OTHER_BEZIER,
    OTHER_BRIDGE,
};
pub use dee::{dee, DEEBaseline};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Probabilities are floored here before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;
/// Row-sum tolerance for a valid probability vector.
pub const ROW_SUM_TOL: f64 = 1e-9;
pub const DEFAULT_BINS: usize = 15;

/// N x K matrix whose rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Matrix);

impl ProbMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        for (i, row) in m.iter_rows().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(Error::invalid(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub(crate) fn from_normalized(m: Matrix) -> Self {
        Self(m)
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn classes(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.0.iter_rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Uniform average of equally shaped probability matrices.
    ///
    /// Bitwise-identical members are grouped and weighted by their count, so
    /// averaging `k` copies of one matrix returns it unchanged.
    pub fn average(members: &[&ProbMatrix]) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::invalid("cannot average zero members"))?;
        let (n, k) = (first.rows(), first.classes());
        let mut groups: Vec<(&ProbMatrix, usize)> = Vec::new();
        for &m in members {
            if m.rows() != n || m.classes() != k {
                return Err(Error::shape(format!(
                    "member is {}x{}, expected {n}x{k}",
                    m.rows(),
                    m.classes()
                )));
            }
            match groups.iter_mut().find(|(g, _)| bit_identical(g, m)) {
                Some((_, count)) => *count += 1,
                None => groups.push((m, 1)),
            }
        }
        let total = members.len() as f64;
        let mut acc = Matrix::zeros(n, k);
        for (m, count) in groups {
            let w = count as f64 / total;
            for i in 0..n {
                for (a, b) in acc.row_mut(i).iter_mut().zip(m.row(i)) {
                    *a += w * b;
                }
            }
        }
        Ok(Self(acc))
    }
}

fn bit_identical(a: &ProbMatrix, b: &ProbMatrix) -> bool {
    a.0.as_slice()
        .iter()
        .zip(b.0.as_slice())
        .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn check_labels(probs: &ProbMatrix, labels: &[usize]) -> Result<()> {
    if probs.rows() == 0 {
        return Err(Error::invalid("metric over an empty set"));
    }
    if labels.len() != probs.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} predictions",
            labels.len(),
            probs.rows()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= probs.classes()) {
        return Err(Error::invalid(format!(
            "label {y} out of range for {} classes",
            probs.classes()
        )));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub fn accuracy(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    let hits = probs
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn nll(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    let total: f64 = probs
        .iter_rows()
        .zip(labels)
        .map(|(row, &y)| -row[y].max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn brier(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(probs, labels)?;
    let total: f64 = probs
        .iter_rows()
        .zip(labels)
        .map(|(row, &y)| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let d = p - if k == y { 1.0 } else { 0.0 };
                    d * d
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / labels.len() as f64)
}

/// Bin holding confidence `c`: `[b/n, (b+1)/n)`, last bin closed at 1.
pub(crate) fn confidence_bin(c: f64, n_bins: usize) -> usize {
    let mut b = ((c * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1);
    while b > 0 && c < b as f64 / n_bins as f64 {
        b -= 1;
    }
    while b + 1 < n_bins && c >= (b + 1) as f64 / n_bins as f64 {
        b += 1;
    }
    b
}

/// Expected calibration error over `n_bins` equal-width max-confidence bins.
pub fn ece(probs: &ProbMatrix, labels: &[usize], n_bins: usize) -> Result<f64> {
    check_labels(probs, labels)?;
    if n_bins == 0 {
        return Err(Error::invalid("n_bins must be >= 1"));
    }
    let mut count = vec![0usize; n_bins];
    let mut conf = vec![0.0; n_bins];
    let mut correct = vec![0.0; n_bins];
    for (row, &y) in probs.iter_rows().zip(labels) {
        let pred = argmax(row);
        let c = row[pred];
        let b = confidence_bin(c, n_bins);
        count[b] += 1;
        conf[b] += c;
        if pred == y {
            correct[b] += 1.0;
        }
    }
    let total = labels.len() as f64;
    let mut out = 0.0;
    for b in 0..n_bins {
        if count[b] == 0 {
            continue;
        }
        let n = count[b] as f64;
        out += (n / total) * (correct[b] / n - conf[b] / n).abs();
    }
    Ok(out)
}

/// Calibrated evaluation summary. Serializes with the fixed key set
/// `acc, nll, ece, bs, dee, temperature, n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub acc: f64,
    pub nll: f64,
    pub ece: f64,
    #[serde(rename = "bs")]
    pub brier: f64,
    pub dee: Option<f64>,
    pub temperature: f64,
    pub n: usize,
}

/// Metrics at a fixed temperature.
pub fn evaluate_at(probs: &ProbMatrix, labels: &[usize], temperature: f64, n_bins: usize) -> Result<EvalReport> {
    let scaled = apply_temperature(probs, temperature)?;
    Ok(EvalReport {
        acc: accuracy(&scaled, labels)?,
        nll: nll(&scaled, labels)?,
        ece: ece(&scaled, labels, n_bins)?,
        brier: brier(&scaled, labels)?,
        dee: None,
        temperature,
        n: labels.len(),
    })
}

/// Fits the temperature on the validation predictions, then reports the
/// temperature-scaled metrics on the test predictions (plus DEE when a
/// baseline is given).
pub fn evaluate_calibrated(
    test: &ProbMatrix,
    test_labels: &[usize],
    val: &ProbMatrix,
    val_labels: &[usize],
    n_bins: usize,
    baseline: Option<&DEEBaseline>,
) -> Result<EvalReport> {
    let t = fit_temperature(val, val_labels)?;
    let mut report = evaluate_at(test, test_labels, t, n_bins)?;
    if let Some(b) = baseline {
        report.dee = Some(dee(report.nll, b)?);
    }
    Ok(report)
}
