use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// NLL of DE-m for increasing ensemble sizes m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DEEBaseline {
    points: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BaselineRow {
    m: usize,
    nll: f64,
}

impl DEEBaseline {
    pub fn new(points: Vec<(usize, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("DEE baseline needs at least two ensemble sizes"));
        }
        if points[0].0 == 0 {
            return Err(Error::invalid("ensemble sizes must be positive"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("ensemble sizes must be strictly increasing"));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::invalid("baseline NLL values must be finite"));
        }
        Ok(Self {
            points: points.into_iter().map(|(m, v)| (m as f64, v)).collect(),
        })
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.points.iter().map(|&(m, v)| (m as usize, v))
    }

    /// CSV with header `m,nll`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (m, nll) in self.points() {
            w.serialize(BaselineRow { m, nll }).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut points = Vec::new();
        for row in r.deserialize::<BaselineRow>() {
            let row = row.map_err(csv_err)?;
            points.push((row.m, row.nll));
        }
        Self::new(points)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("DEE baseline csv: {e}"))
}

fn solve(seg: ((f64, f64), (f64, f64)), q: f64) -> f64 {
    let ((m0, n0), (m1, n1)) = seg;
    m0 + (q - n0) * (m1 - m0) / (n1 - n0)
}

/// Deep-ensemble-equivalent size: the (fractional) m at which the linearly
/// interpolated DE-m NLL curve reaches `nll_value`.
///
/// The first crossing from the left wins. Outside the baseline range the
/// end segments are extrapolated (first segment for queries worse than DE-1,
/// last segment otherwise). The result is clamped at 0.
pub fn dee(nll_value: f64, baseline: &DEEBaseline) -> Result<f64> {
    if !nll_value.is_finite() {
        return Err(Error::invalid("DEE query NLL must be finite"));
    }
    let pts = &baseline.points;
    let sloped: Vec<((f64, f64), (f64, f64))> = pts
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|(a, b)| a.1 != b.1)
        .collect();
    if sloped.is_empty() {
        return Err(Error::invalid("degenerate DEE baseline: all NLL values equal"));
    }

    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if nll_value == a.1 {
            return Ok(a.0.max(0.0));
        }
        let (lo, hi) = if a.1 < b.1 { (a.1, b.1) } else { (b.1, a.1) };
        if a.1 != b.1 && lo <= nll_value && nll_value <= hi {
            return Ok(solve((a, b), nll_value).max(0.0));
        }
    }
    let last = pts[pts.len() - 1];
    if nll_value == last.1 {
        return Ok(last.0);
    }

    let first = pts[0];
    let worse_than_single = if sloped[0].1 .1 < sloped[0].0 .1 {
        nll_value > first.1
    } else {
        nll_value < first.1
    };
    let seg = if worse_than_single {
        sloped[0]
    } else {
        sloped[sloped.len() - 1]
    };
    Ok(solve(seg, nll_value).max(0.0))
}
