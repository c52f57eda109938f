use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::ArchSpec;
use super::forward::ForwardResult;
use super::loss::softmax_unchecked;
use super::params::ParameterVector;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::ProbMatrix;

/// An architecture together with one point in its parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub arch: ArchSpec,
    pub params: ParameterVector,
}

/// Softmax of every row; logits from a validated forward pass are finite.
pub(crate) fn softmax_rows(logits: &Matrix) -> ProbMatrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        out.row_mut(i).copy_from_slice(&softmax_unchecked(logits.row(i)));
    }
    ProbMatrix::from_normalized(out)
}

impl Network {
    pub fn new(arch: ArchSpec, params: ParameterVector) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::shape(format!(
                "parameter vector has {} entries, architecture needs {}",
                params.len(),
                arch.param_count()
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn init(arch: ArchSpec, seed: u64) -> Self {
        let params = ParameterVector::init(&arch, &mut ChaCha8Rng::seed_from_u64(seed));
        Self { arch, params }
    }

    /// Content fingerprint of the parameters; identifies a mode.
    pub fn id(&self) -> String {
        self.params.fingerprint()
    }

    pub fn forward_batch(&self, inputs: &Matrix) -> Result<Vec<ForwardResult>> {
        self.arch.forward_batch(self.params.as_slice(), inputs)
    }

    pub fn logits(&self, inputs: &Matrix) -> Result<Matrix> {
        self.arch.logits(self.params.as_slice(), inputs)
    }

    pub fn predict(&self, inputs: &Matrix) -> Result<ProbMatrix> {
        Ok(softmax_rows(&self.logits(inputs)?))
    }

    /// Class probabilities and tapped features from a single pass.
    pub fn predict_with_features(&self, inputs: &Matrix) -> Result<(ProbMatrix, Matrix)> {
        let results = self.forward_batch(inputs)?;
        let logits: Vec<&[f64]> = results.iter().map(|r| r.logits.as_slice()).collect();
        let feats: Vec<&[f64]> = results.iter().map(|r| r.tapped_feature.as_slice()).collect();
        Ok((softmax_rows(&Matrix::from_rows(&logits)?), Matrix::from_rows(&feats)?))
    }
}
