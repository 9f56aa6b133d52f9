//! Training pipeline: run configuration, L1 loss, the Adam optimizer with a
//! halving learning-rate schedule, patch sampling with dihedral
//! augmentation, checkpointing, and the evaluation protocol.

mod adam;
mod checkpoint;
mod data;
mod eval;
mod run;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CheckpointHeader, RngState};
pub use data::{augment, dihedral, read_manifest, sample_patch, stack_images, TrainSet};
pub use eval::{evaluate, super_resolve, EvalReport, EvalRow, EvalSubject, SrResult};
pub use run::{train, EpochLog, TrainOptions, TrainReport};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::tensor::{abs, mean, sub, Graph, Scalar, Tensor};
use crate::{Error, Result};

fn default_base_channels() -> usize {
    64
}
fn default_denseres_blocks() -> usize {
    6
}
fn default_resblocks_per_block() -> usize {
    4
}
fn default_attn_base_channels() -> usize {
    32
}
fn default_attn_growth() -> usize {
    16
}
fn default_attn_convs_per_dense_block() -> usize {
    3
}
fn default_patch_size() -> usize {
    48
}
fn default_batch_size() -> usize {
    16
}
fn default_max_epochs() -> usize {
    80
}
fn default_lr0() -> f64 {
    1e-4
}
fn default_lr_halve_every() -> usize {
    10
}
fn default_early_stop_patience() -> usize {
    10
}
fn default_steps_per_epoch() -> usize {
    1000
}

/// One flat JSON document describing a whole run: the architecture fields
/// and the training-loop fields side by side, sharing a single `scale`.
/// Every field except `scale`, `seed`, and the two manifest paths has a
/// default matching the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scale: usize,
    #[serde(default = "default_base_channels")]
    pub base_channels: usize,
    #[serde(default = "default_denseres_blocks")]
    pub denseres_blocks: usize,
    #[serde(default = "default_resblocks_per_block")]
    pub resblocks_per_block: usize,
    #[serde(default = "default_attn_base_channels")]
    pub attn_base_channels: usize,
    #[serde(default = "default_attn_growth")]
    pub attn_growth: usize,
    #[serde(default = "default_attn_convs_per_dense_block")]
    pub attn_convs_per_dense_block: usize,
    /// Low-resolution patch side; the ground-truth patch side is
    /// `patch_size * scale`.
    #[serde(default = "default_patch_size")]
    pub patch_size: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_lr_halve_every")]
    pub lr_halve_every: usize,
    /// Stop when validation PSNR has not improved for this many epochs.
    #[serde(default = "default_early_stop_patience")]
    pub early_stop_patience: usize,
    pub seed: u64,
    pub train_manifest: PathBuf,
    pub val_manifest: PathBuf,
    #[serde(default = "default_steps_per_epoch")]
    pub steps_per_epoch: usize,
}

impl RunConfig {
    /// Parse a config file. Relative manifest paths are resolved against the
    /// config file's directory, so run directories are relocatable.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::io(path, source))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
                path: path.to_path_buf(),
                detail: e.to_string(),
            })?;
        if let Some(dir) = path.parent() {
            for manifest in [&mut config.train_manifest, &mut config.val_manifest] {
                if manifest.is_relative() {
                    *manifest = dir.join(&manifest);
                }
            }
        }
        config.validate().map_err(|e| Error::InvalidConfig {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        Ok(config)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            scale: self.scale,
            base_channels: self.base_channels,
            denseres_blocks: self.denseres_blocks,
            resblocks_per_block: self.resblocks_per_block,
            attn_base_channels: self.attn_base_channels,
            attn_growth: self.attn_growth,
            attn_convs_per_dense_block: self.attn_convs_per_dense_block,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        if self.patch_size == 0 || self.patch_size % self.scale != 0 {
            return Err(Error::invalid(
                "RunConfig",
                format!(
                    "patch_size {} must be a positive multiple of scale {}",
                    self.patch_size, self.scale
                ),
            ));
        }
        if (self.patch_size * self.scale) % 4 != 0 {
            return Err(Error::invalid(
                "RunConfig",
                format!(
                    "ground-truth patch side {} must be divisible by 4 (mask branch pools twice)",
                    self.patch_size * self.scale
                ),
            ));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("lr_halve_every", self.lr_halve_every),
        ] {
            if v == 0 {
                return Err(Error::invalid("RunConfig", format!("{name} must be >= 1")));
            }
        }
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::invalid("RunConfig", "lr0 must be positive and finite"));
        }
        Ok(())
    }
}

/// Step-decay schedule: `lr0 * 0.5^(epoch / halve_every)` with integer
/// division, so the rate is piecewise constant and halves every
/// `halve_every` epochs. `epoch` is 0-based.
pub fn lr_schedule(lr0: f64, halve_every: usize, epoch: usize) -> f64 {
    lr0 * 0.5f64.powi((epoch / halve_every.max(1)) as i32)
}

/// Mean absolute error over all elements. The subgradient at exact ties is
/// zero, inherited from the absolute-value op.
pub fn l1_loss<T: Scalar>(g: &Graph<T>, pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(mean(g, &abs(g, &sub(g, pred, target)?)))
}
