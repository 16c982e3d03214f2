use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use crate::data::{SigmaRegime, StreamConfig};
use crate::models::ModelConfig;
use crate::{Error, Result};

fn default_batch() -> usize {
    32
}
fn default_patch() -> usize {
    64
}
fn default_stride() -> usize {
    32
}
fn default_lr() -> f32 {
    1e-3
}
fn default_decay_factor() -> f32 {
    0.5
}

/// Step decay: multiply the rate by `factor` every `every_epochs` epochs.
/// When `every_epochs` is absent the rate drops every third of the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    #[serde(default)]
    pub every_epochs: Option<u64>,
    #[serde(default = "default_decay_factor")]
    pub factor: f32,
}

impl Default for LrDecay {
    fn default() -> Self {
        LrDecay {
            every_epochs: None,
            factor: default_decay_factor(),
        }
    }
}

/// A training run, as read from its JSON document.
///
/// ```json
/// {
///   "model": {"variant": "WIN5-RB", "width": 16, "kernel": 5},
///   "sigma_regime": {"kind": "single", "sigma": 30},
///   "epochs": 6,
///   "steps_per_epoch": 100,
///   "batch": 8,
///   "patch_size": 40,
///   "stride": 16,
///   "seed": 1,
///   "train_manifest": "data/train.txt",
///   "eval_manifest": "data/test.txt",
///   "out_dir": "runs/rb30"
/// }
/// ```
///
/// Paths are resolved against the directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub sigma_regime: SigmaRegime,
    pub epochs: u64,
    pub steps_per_epoch: u64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_patch")]
    pub patch_size: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Random dihedral transform per patch.
    #[serde(default)]
    pub augment: bool,
    #[serde(default = "default_lr")]
    pub learning_rate: f32,
    #[serde(default)]
    pub lr_decay: LrDecay,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Seeds both initialization and the data stream.
    #[serde(default)]
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 keeps only the final one.
    #[serde(default)]
    pub checkpoint_every: u64,
    /// Noise levels for the end-of-epoch evaluation. Defaults to the training
    /// sigma, or 10/30/50/70 for blind training.
    #[serde(default)]
    pub eval_sigmas: Vec<f32>,
    #[serde(default)]
    pub train_manifest: Option<PathBuf>,
    #[serde(default)]
    pub eval_manifest: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, sigma_regime: SigmaRegime, epochs: u64, steps_per_epoch: u64) -> Self {
        TrainConfig {
            model,
            sigma_regime,
            epochs,
            steps_per_epoch,
            batch: default_batch(),
            patch_size: default_patch(),
            stride: default_stride(),
            augment: false,
            learning_rate: default_lr(),
            lr_decay: LrDecay::default(),
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_every: 0,
            eval_sigmas: Vec::new(),
            train_manifest: None,
            eval_manifest: None,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        let mut cfg = TrainConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.train_manifest, &mut cfg.eval_manifest, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.sigma_regime.validate()?;
        let counts = [
            ("epochs", self.epochs as usize),
            ("steps_per_epoch", self.steps_per_epoch as usize),
            ("batch", self.batch),
            ("patch_size", self.patch_size),
            ("stride", self.stride),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.lr_decay.every_epochs == Some(0) {
            return Err(Error::Config("lr_decay.every_epochs must be >= 1".into()));
        }
        if self.eval_sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("eval_sigmas must be >= 0".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.epochs * self.steps_per_epoch
    }

    pub fn decay_every(&self) -> u64 {
        self.lr_decay.every_epochs.unwrap_or_else(|| self.epochs.div_ceil(3).max(1))
    }

    /// Learning rate in effect for 0-based step `step`.
    pub fn lr_at(&self, step: u64) -> f32 {
        let epoch = step / self.steps_per_epoch;
        let drops = (epoch / self.decay_every()) as i32;
        self.learning_rate * self.lr_decay.factor.powi(drops)
    }

    pub fn stream_config(&self) -> StreamConfig {
        StreamConfig {
            regime: self.sigma_regime,
            patch_size: self.patch_size,
            stride: self.stride,
            batch: self.batch,
            augment: self.augment,
            seed: self.seed,
        }
    }

    pub fn eval_sigma_list(&self) -> Vec<f32> {
        if !self.eval_sigmas.is_empty() {
            return self.eval_sigmas.clone();
        }
        match self.sigma_regime {
            SigmaRegime::Single { sigma } => vec![sigma],
            SigmaRegime::Blind { .. } => vec![10.0, 30.0, 50.0, 70.0],
        }
    }
}
