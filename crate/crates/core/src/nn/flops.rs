//! Analytic forward-pass FLOP counts.
//!
//! Conventions: a dense layer costs `2 d_in d_out` plus `d_out` for the bias;
//! ReLU costs 1 per element; FRN (mean of squares, normalize, scale, shift,
//! threshold) costs 6 per element; a residual add costs 1 per element.
//! Softmax is not counted.

use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, LayerSpec};

pub const RELU_FLOPS: u64 = 1;
pub const FRN_FLOPS: u64 = 6;
pub const ADD_FLOPS: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub total_flops: u64,
    pub param_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_flops: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_params: Option<f64>,
}

fn dense_flops(d_in: usize, d_out: usize, bias: bool) -> u64 {
    (2 * d_in * d_out + if bias { d_out } else { 0 }) as u64
}

pub fn layer_flops(layer: &LayerSpec, in_dim: usize) -> u64 {
    match *layer {
        LayerSpec::Dense { d_in, d_out, bias } => dense_flops(d_in, d_out, bias),
        LayerSpec::Relu => RELU_FLOPS * in_dim as u64,
        LayerSpec::Frn { width, .. } => FRN_FLOPS * width as u64,
        LayerSpec::Residual { width, hidden, .. } => {
            dense_flops(width, hidden, true)
                + FRN_FLOPS * hidden as u64
                + RELU_FLOPS * hidden as u64
                + dense_flops(hidden, width, true)
                + ADD_FLOPS * width as u64
        }
    }
}

impl FlopsReport {
    pub fn new(total_flops: u64, param_count: u64) -> Self {
        Self {
            total_flops,
            param_count,
            relative_flops: None,
            relative_params: None,
        }
    }

    /// Sum of member costs; relative fields are dropped.
    pub fn sum<'a>(members: impl IntoIterator<Item = &'a FlopsReport>) -> Self {
        members.into_iter().fold(Self::new(0, 0), |acc, m| {
            Self::new(acc.total_flops + m.total_flops, acc.param_count + m.param_count)
        })
    }

    /// Fills the relative fields against `reference`. A zero reference
    /// quantity leaves the matching field unset.
    pub fn relative_to(mut self, reference: &FlopsReport) -> Self {
        self.relative_flops =
            (reference.total_flops > 0).then(|| self.total_flops as f64 / reference.total_flops as f64);
        self.relative_params =
            (reference.param_count > 0).then(|| self.param_count as f64 / reference.param_count as f64);
        self
    }
}

pub fn count_flops(arch: &ArchSpec, reference: Option<&FlopsReport>) -> FlopsReport {
    let total = arch
        .layers()
        .iter()
        .zip(arch.slots())
        .map(|(l, s)| layer_flops(l, s.in_dim))
        .sum();
    let report = FlopsReport::new(total, arch.param_count() as u64);
    match reference {
        Some(r) => report.relative_to(r),
        None => report,
    }
}

/// Cost of running the feature extractor only (layers up to the tap).
pub fn count_feature_flops(arch: &ArchSpec) -> FlopsReport {
    let upto = arch.feature_tap() + 1;
    let total = arch.layers()[..upto]
        .iter()
        .zip(arch.slots())
        .map(|(l, s)| layer_flops(l, s.in_dim))
        .sum();
    let params = arch.slots()[..upto].iter().map(|s| s.len).sum::<usize>();
    FlopsReport::new(total, params as u64)
}
