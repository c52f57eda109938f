//! Bridge networks: lightweight residual networks that predict the output of
//! a Bezier-curve model from the tapped features of the curve's endpoint(s).
//!
//! A type I bridge reads the feature of one endpoint; a type II bridge reads
//! both, fused by concatenation `[z_a ; z_b]`. Both share the trunk
//! `Dense(in, W) -> 3 x Residual(W, W) -> Dense(W, K)` and emit logits.

mod ensemble;
mod mixup;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ensemble::{compose_ensemble, composition_flops, ensemble_type1, ensemble_type2, Member};
pub use mixup::{mix_pair, mixup, mixup_with, mixup_with_rng, sample_beta, MixupCfg};
pub use train::{teacher_targets, train_bridge};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::ProbMatrix;
use crate::nn::{softmax_rows, ArchSpec, LayerSpec, ParameterVector};

pub const BLOCK_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BridgeKind {
    #[serde(rename = "type_i")]
    TypeI,
    #[serde(rename = "type_ii")]
    TypeII,
}

impl BridgeKind {
    pub fn inputs(self) -> usize {
        match self {
            BridgeKind::TypeI => 1,
            BridgeKind::TypeII => 2,
        }
    }
}

fn default_target_r() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSpec {
    pub kind: BridgeKind,
    /// Dimension of one endpoint feature `z`.
    pub feature_dim: usize,
    pub width: usize,
    pub class_count: usize,
    #[serde(default = "default_target_r")]
    pub target_r: f64,
}

impl BridgeSpec {
    pub fn new(kind: BridgeKind, feature_dim: usize, width: usize, class_count: usize, target_r: f64) -> Result<Self> {
        let spec = Self {
            kind,
            feature_dim,
            width,
            class_count,
            target_r,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.feature_dim == 0 || self.class_count == 0 {
            return Err(Error::InvalidConfig(
                "bridge width, feature_dim and class_count must be >= 1".into(),
            ));
        }
        if !(self.target_r > 0.0 && self.target_r < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bridge target_r = {} must lie in (0, 1)",
                self.target_r
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim * self.kind.inputs()
    }

    pub fn arch(&self) -> Result<ArchSpec> {
        self.validate()?;
        let w = self.width;
        let mut layers = vec![LayerSpec::dense(self.input_dim(), w)];
        layers.extend((0..BLOCK_COUNT).map(|_| LayerSpec::residual(w, w)));
        layers.push(LayerSpec::dense(w, self.class_count));
        ArchSpec::new(self.input_dim(), self.class_count, layers, BLOCK_COUNT)
    }
}

/// Which curve endpoint feeds a type I bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    A,
    B,
}

impl Endpoint {
    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::A => "a",
            Endpoint::B => "b",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Endpoint::A),
            "b" => Ok(Endpoint::B),
            _ => Err(Error::invalid(format!("unknown endpoint {s:?}"))),
        }
    }
}

/// Mode ids (parameter fingerprints) of the two curve endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CurveIdentity {
    pub mode_a: String,
    pub mode_b: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BridgeModel {
    pub spec: BridgeSpec,
    pub params: ParameterVector,
    pub curve: CurveIdentity,
    /// Feeding endpoint; set for type I, `None` for type II.
    pub feed: Option<Endpoint>,
}

impl BridgeModel {
    pub fn new(
        spec: BridgeSpec,
        params: ParameterVector,
        curve: CurveIdentity,
        feed: Option<Endpoint>,
    ) -> Result<Self> {
        let arch = spec.arch()?;
        if params.len() != arch.param_count() {
            return Err(Error::shape(format!(
                "bridge parameters have {} entries, spec needs {}",
                params.len(),
                arch.param_count()
            )));
        }
        match (spec.kind, feed) {
            (BridgeKind::TypeI, None) => return Err(Error::invalid("type I bridge needs a feeding endpoint")),
            (BridgeKind::TypeII, Some(_)) => return Err(Error::invalid("type II bridge reads both endpoints")),
            _ => {}
        }
        Ok(Self {
            spec,
            params,
            curve,
            feed,
        })
    }

    /// Freshly initialized bridge.
    pub fn init(spec: BridgeSpec, curve: CurveIdentity, feed: Option<Endpoint>, seed: u64) -> Result<Self> {
        let arch = spec.arch()?;
        let params = ParameterVector::init(&arch, &mut ChaCha8Rng::seed_from_u64(seed));
        Self::new(spec, params, curve, feed)
    }

    /// Mode ids whose features this bridge consumes, in input order.
    pub fn required_modes(&self) -> Vec<&str> {
        match self.feed {
            Some(Endpoint::A) => vec![&self.curve.mode_a],
            Some(Endpoint::B) => vec![&self.curve.mode_b],
            None => vec![&self.curve.mode_a, &self.curve.mode_b],
        }
    }

    fn check_features(&self, z_i: &Matrix, z_j: Option<&Matrix>) -> Result<()> {
        let d = self.spec.feature_dim;
        match (self.spec.kind, z_j) {
            (BridgeKind::TypeI, Some(_)) => return Err(Error::invalid("type I bridge takes one feature")),
            (BridgeKind::TypeII, None) => return Err(Error::invalid("type II bridge takes two features")),
            _ => {}
        }
        for z in std::iter::once(z_i).chain(z_j) {
            if z.cols() != d {
                return Err(Error::shape(format!(
                    "feature has {} dims, bridge expects {d}",
                    z.cols()
                )));
            }
            if z.rows() != z_i.rows() {
                return Err(Error::shape("feature batches differ in length"));
            }
        }
        Ok(())
    }

    /// Bridge input batch: `z_i`, or `[z_i ; z_j]` row-wise for type II.
    pub fn fuse(&self, z_i: &Matrix, z_j: Option<&Matrix>) -> Result<Matrix> {
        self.check_features(z_i, z_j)?;
        Ok(match z_j {
            None => z_i.clone(),
            Some(z_j) => {
                let rows: Vec<Vec<f64>> = z_i
                    .iter_rows()
                    .zip(z_j.iter_rows())
                    .map(|(a, b)| a.iter().chain(b).copied().collect())
                    .collect();
                Matrix::from_rows(&rows)?
            }
        })
    }

    pub fn logits(&self, z_i: &Matrix, z_j: Option<&Matrix>) -> Result<Matrix> {
        let input = self.fuse(z_i, z_j)?;
        self.spec.arch()?.logits(self.params.as_slice(), &input)
    }

    pub fn predict(&self, z_i: &Matrix, z_j: Option<&Matrix>) -> Result<ProbMatrix> {
        Ok(softmax_rows(&self.logits(z_i, z_j)?))
    }
}

/// Logits for a single sample.
pub fn bridge_forward(bridge: &BridgeModel, z_i: &[f64], z_j: Option<&[f64]>) -> Result<Vec<f64>> {
    let zi = Matrix::from_rows(&[z_i])?;
    let zj = z_j.map(|z| Matrix::from_rows(&[z])).transpose()?;
    Ok(bridge.logits(&zi, zj.as_ref())?.row(0).to_vec())
}
