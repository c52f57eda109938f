//! Fixed-architecture feed-forward networks over flat parameter vectors.

mod arch;
mod flops;
mod forward;
mod loss;
mod network;
mod optim;
mod params;
mod train;

pub use arch::{ArchSpec, LayerSlot, LayerSpec, FRN_EPS};
pub use flops::{count_feature_flops, count_flops, layer_flops, FlopsReport, ADD_FLOPS, FRN_FLOPS, RELU_FLOPS};
pub use forward::ForwardResult;
pub use loss::{cross_entropy, kl_loss, softmax, TARGET_NORM_TOL};
pub use network::Network;
pub use optim::{cosine_lr, sgd_step, OptimizerCfg};
pub use params::ParameterVector;
pub use train::{mean_loss, train_network, StepLog};

pub(crate) use network::softmax_rows;
pub(crate) use train::{ce_batch, check_data, check_finite_logits, Minibatches};
