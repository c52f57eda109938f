use serde::{Deserialize, Serialize};

use super::{ProbMatrix, PROB_FLOOR};
use crate::error::{Error, Result};

pub const MATCH_BRIDGE: &str = "match bridge";
pub const OTHER_BRIDGE: &str = "other bridge";
pub const OTHER_BEZIER: &str = "other Bezier";

fn same_shape(a: &ProbMatrix, b: &ProbMatrix) -> Result<()> {
    if a.rows() != b.rows() || a.classes() != b.classes() {
        return Err(Error::shape(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.classes(),
            b.rows(),
            b.classes()
        )));
    }
    Ok(())
}

/// Coefficient of determination pooled over all N*K entries around the grand
/// mean of the target.
pub fn r2_score(target: &ProbMatrix, pred: &ProbMatrix) -> Result<f64> {
    same_shape(target, pred)?;
    let t = target.as_matrix().as_slice();
    let p = pred.as_matrix().as_slice();
    if t.is_empty() {
        return Err(Error::invalid("r2 of an empty matrix"));
    }
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let ss_res: f64 = t.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = t.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::invalid("r2 undefined: constant target with nonzero residual"));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean over rows of `KL(target_row || pred_row)`.
pub fn mean_kl(target: &ProbMatrix, pred: &ProbMatrix) -> Result<f64> {
    same_shape(target, pred)?;
    if target.rows() == 0 {
        return Err(Error::invalid("mean_kl of an empty matrix"));
    }
    let total: f64 = target
        .iter_rows()
        .zip(pred.iter_rows())
        .map(|(t, p)| {
            t.iter()
                .zip(p)
                .filter(|(&tk, _)| tk > 0.0)
                .map(|(&tk, &pk)| tk * (tk.ln() - pk.max(PROB_FLOOR).ln()))
                .sum::<f64>()
        })
        .sum();
    Ok(total / target.rows() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRow {
    pub label: String,
    pub r2: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceReport {
    pub rows: Vec<CorrespondenceRow>,
}

impl CorrespondenceReport {
    /// CSV with header `label,r2,kl`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::invalid(format!("correspondence csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn correspondence_report(target: &ProbMatrix, candidates: &[(String, ProbMatrix)]) -> Result<CorrespondenceReport> {
    let rows = candidates
        .iter()
        .map(|(label, probs)| {
            Ok(CorrespondenceRow {
                label: label.clone(),
                r2: r2_score(target, probs)?,
                kl: mean_kl(target, probs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrespondenceReport { rows })
}
