//! Architecture descriptors and the flat parameter layout they induce.
//!
//! Parameters are laid out layer by layer. Within a layer, weights come
//! before biases and weight matrices are row-major with shape `(d_out, d_in)`.
//!
//! | layer                    | slots, in order                                   |
//! |--------------------------|---------------------------------------------------|
//! | `Dense(d_in, d_out)`     | `W[d_out][d_in]`, `b[d_out]` (if `bias`)          |
//! | `Relu`                   | none                                              |
//! | `Frn(width)`             | `gamma[width]`, `beta[width]`, `tau[width]`       |
//! | `Residual(width, hidden)`| `Dense(width, hidden)`, `Frn(hidden)`, `Dense(hidden, width)` |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default FRN epsilon. Fixed, not learned.
pub const FRN_EPS: f64 = 1e-6;

fn default_eps() -> f64 {
    FRN_EPS
}

fn default_bias() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        d_in: usize,
        d_out: usize,
        #[serde(default = "default_bias")]
        bias: bool,
    },
    Relu,
    /// Filter response normalization over the whole feature vector of one
    /// sample, followed by a thresholded linear unit `max(y, tau)`.
    Frn {
        width: usize,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// `u + Dense_b(ReLU(FRN(Dense_a(u))))`.
    Residual {
        width: usize,
        hidden: usize,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

impl LayerSpec {
    pub fn dense(d_in: usize, d_out: usize) -> Self {
        LayerSpec::Dense {
            d_in,
            d_out,
            bias: true,
        }
    }

    pub fn frn(width: usize) -> Self {
        LayerSpec::Frn { width, eps: FRN_EPS }
    }

    pub fn residual(width: usize, hidden: usize) -> Self {
        LayerSpec::Residual {
            width,
            hidden,
            eps: FRN_EPS,
        }
    }

    /// Fixed input dimension, or `None` for shape-polymorphic layers.
    fn fixed_in(&self) -> Option<usize> {
        match *self {
            LayerSpec::Dense { d_in, .. } => Some(d_in),
            LayerSpec::Relu => None,
            LayerSpec::Frn { width, .. } | LayerSpec::Residual { width, .. } => Some(width),
        }
    }

    fn out_dim(&self, in_dim: usize) -> usize {
        match *self {
            LayerSpec::Dense { d_out, .. } => d_out,
            LayerSpec::Relu => in_dim,
            LayerSpec::Frn { width, .. } | LayerSpec::Residual { width, .. } => width,
        }
    }

    fn param_len(&self) -> usize {
        match *self {
            LayerSpec::Dense { d_in, d_out, bias } => d_in * d_out + if bias { d_out } else { 0 },
            LayerSpec::Relu => 0,
            LayerSpec::Frn { width, .. } => 3 * width,
            LayerSpec::Residual { width, hidden, .. } => {
                (width * hidden + hidden) + 3 * hidden + (hidden * width + width)
            }
        }
    }
}

/// Resolved placement of one layer: dimensions and parameter slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSlot {
    pub in_dim: usize,
    pub out_dim: usize,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawArch {
    input_dim: usize,
    class_count: usize,
    layers: Vec<LayerSpec>,
    feature_tap: usize,
}

/// A validated feed-forward architecture.
///
/// The output of layer `feature_tap` is the exposed feature `z`; layers up to
/// and including it form the feature extractor, the rest the classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawArch", into = "RawArch")]
pub struct ArchSpec {
    input_dim: usize,
    class_count: usize,
    layers: Vec<LayerSpec>,
    feature_tap: usize,
    slots: Vec<LayerSlot>,
    param_count: usize,
}

impl PartialEq for ArchSpec {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.class_count == other.class_count
            && self.layers == other.layers
            && self.feature_tap == other.feature_tap
    }
}

impl TryFrom<RawArch> for ArchSpec {
    type Error = Error;

    fn try_from(raw: RawArch) -> Result<Self> {
        ArchSpec::new(raw.input_dim, raw.class_count, raw.layers, raw.feature_tap)
    }
}

impl From<ArchSpec> for RawArch {
    fn from(a: ArchSpec) -> Self {
        RawArch {
            input_dim: a.input_dim,
            class_count: a.class_count,
            layers: a.layers,
            feature_tap: a.feature_tap,
        }
    }
}

impl ArchSpec {
    pub fn new(input_dim: usize, class_count: usize, layers: Vec<LayerSpec>, feature_tap: usize) -> Result<Self> {
        if input_dim == 0 || class_count == 0 {
            return Err(Error::InvalidConfig("input_dim and class_count must be >= 1".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidConfig("architecture has no layers".into()));
        }
        match layers.last() {
            Some(LayerSpec::Dense { d_out, .. }) if *d_out == class_count => {}
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "final layer must be Dense(_, {class_count}) classifier"
                )))
            }
        }
        if feature_tap + 1 >= layers.len() {
            return Err(Error::InvalidConfig(format!(
                "feature_tap {feature_tap} must precede the classifier layer {}",
                layers.len() - 1
            )));
        }

        let mut slots = Vec::with_capacity(layers.len());
        let mut dim = input_dim;
        let mut offset = 0;
        for (i, layer) in layers.iter().enumerate() {
            if let Some(d) = layer.fixed_in() {
                if d != dim {
                    return Err(Error::InvalidConfig(format!(
                        "layer {i} expects input dim {d}, previous layer produces {dim}"
                    )));
                }
            }
            match *layer {
                LayerSpec::Dense { d_out: 0, .. } => {
                    return Err(Error::InvalidConfig(format!("layer {i} has d_out = 0")))
                }
                LayerSpec::Residual { hidden: 0, .. } => {
                    return Err(Error::InvalidConfig(format!("layer {i} has hidden = 0")))
                }
                LayerSpec::Frn { eps, .. } | LayerSpec::Residual { eps, .. } if !(eps >= 0.0 && eps.is_finite()) => {
                    return Err(Error::InvalidConfig(format!("layer {i} has invalid eps")))
                }
                _ => {}
            }
            let out_dim = layer.out_dim(dim);
            let len = layer.param_len();
            slots.push(LayerSlot {
                in_dim: dim,
                out_dim,
                offset,
                len,
            });
            offset += len;
            dim = out_dim;
        }

        Ok(Self {
            input_dim,
            class_count,
            layers,
            feature_tap,
            slots,
            param_count: offset,
        })
    }

    /// `Dense(D, width) -> ReLU -> Residual(width, width) x blocks -> Dense(width, K)`,
    /// tapping the output of layer `feature_tap`.
    pub fn residual_mlp(
        input_dim: usize,
        class_count: usize,
        width: usize,
        blocks: usize,
        feature_tap: usize,
    ) -> Result<Self> {
        let mut layers = vec![LayerSpec::dense(input_dim, width), LayerSpec::Relu];
        layers.extend((0..blocks).map(|_| LayerSpec::residual(width, width)));
        layers.push(LayerSpec::dense(width, class_count));
        Self::new(input_dim, class_count, layers, feature_tap)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn feature_tap(&self) -> usize {
        self.feature_tap
    }

    /// Dimension of the tapped feature `z`.
    pub fn feature_dim(&self) -> usize {
        self.slots[self.feature_tap].out_dim
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }
}
