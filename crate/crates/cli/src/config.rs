//! Run configuration. Every section rejects unknown keys; all randomness is
//! derived from the run seed, so optimizer sections carry no seed of their own.

use std::path::{Path, PathBuf};

use bridgenet::bridge::{BridgeKind, MixupCfg};
use bridgenet::metrics::DEFAULT_BINS;
use bridgenet::nn::{ArchSpec, OptimizerCfg};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub arch: ArchSection,
    pub optimizer: OptimizerSections,
    #[serde(default)]
    pub mixup: MixupSection,
    pub bridge: BridgeSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub seed: u64,
}

/// Residual MLP template; input and class counts come from the data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSection {
    pub width: usize,
    pub blocks: usize,
    #[serde(default = "default_tap")]
    pub feature_tap: usize,
}

fn default_tap() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSections {
    pub mode: OptimizerSection,
    pub curve: OptimizerSection,
    pub bridge: OptimizerSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub base_lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    pub total_steps: usize,
    pub batch_size: usize,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    5e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixupSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for MixupSection {
    fn default() -> Self {
        Self { alpha: default_alpha() }
    }
}

fn default_alpha() -> f64 {
    0.4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSection {
    #[serde(default = "default_kind")]
    pub kind: BridgeKind,
    pub width: usize,
    #[serde(default = "default_target_r")]
    pub target_r: f64,
}

fn default_kind() -> BridgeKind {
    BridgeKind::TypeII
}

fn default_target_r() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    #[serde(default)]
    pub dee_baseline: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_bins: default_bins(),
            dee_baseline: None,
        }
    }
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl OptimizerSection {
    pub fn with_seed(&self, seed: u64) -> Result<OptimizerCfg, CliError> {
        let cfg = OptimizerCfg {
            base_lr: self.base_lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            total_steps: self.total_steps,
            batch_size: self.batch_size,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl MixupSection {
    pub fn with_seed(&self, seed: u64) -> Result<MixupCfg, CliError> {
        let cfg = MixupCfg {
            alpha: self.alpha,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Reads and validates the whole document before any work starts.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        for opt in [&self.optimizer.mode, &self.optimizer.curve, &self.optimizer.bridge] {
            opt.with_seed(0)?;
        }
        self.mixup.with_seed(0)?;
        if self.arch.width == 0 || self.arch.blocks == 0 {
            return Err(CliError::Usage("arch width and blocks must be >= 1".into()));
        }
        if self.arch.feature_tap > self.arch.blocks + 1 {
            return Err(CliError::Usage(format!(
                "feature_tap {} must be at most blocks + 1 = {}",
                self.arch.feature_tap,
                self.arch.blocks + 1
            )));
        }
        if self.bridge.width == 0 {
            return Err(CliError::Usage("bridge width must be >= 1".into()));
        }
        if !(self.bridge.target_r > 0.0 && self.bridge.target_r < 1.0) {
            return Err(CliError::Usage("bridge target_r must lie in (0, 1)".into()));
        }
        if self.eval.n_bins == 0 {
            return Err(CliError::Usage("eval n_bins must be >= 1".into()));
        }
        Ok(())
    }

    pub fn arch(&self, input_dim: usize, class_count: usize) -> Result<ArchSpec, CliError> {
        Ok(ArchSpec::residual_mlp(
            input_dim,
            class_count,
            self.arch.width,
            self.arch.blocks,
            self.arch.feature_tap,
        )?)
    }
}
