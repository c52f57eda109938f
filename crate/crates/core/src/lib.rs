//! Fast ensembling with Bezier low-loss subspaces and bridge networks.
//!
//! Independently trained networks ("modes") are connected by quadratic
//! Bezier curves in parameter space whose middle control point is trained so
//! the whole curve has low loss. Models sampled from a curve are good ensemble
//! members but each costs a full forward pass; a small bridge network instead
//! predicts the curve model's output from the tapped features of the
//! endpoint(s), which are computed anyway when the modes themselves are
//! ensemble members.
//!
//! - [`nn`]: residual MLPs over flat parameter vectors, analytic gradients,
//!   momentum SGD with cosine schedule, FLOP counting.
//! - [`subspace`]: Bezier curves, pin-point training, curve scans, Bezier
//!   ensembles.
//! - [`bridge`]: type I / type II bridges, mixup distillation, ensemble rules.
//! - [`metrics`]: ACC / NLL / Brier / ECE, temperature scaling, DEE,
//!   R² and KL correspondence.
//! - [`dataio`]: toy datasets, CSV, splits, binary checkpoints.

pub mod bridge;
pub mod dataio;
mod error;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod subspace;

pub use error::{Error, Result};
pub use matrix::Matrix;
