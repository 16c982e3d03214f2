//! Seeded stream of (noisy, clean) training batches.
//!
//! The stream is a pure function of `(corpus, config, batch index)`. Each
//! epoch visits every patch once in an order shuffled from `(seed, epoch)`;
//! the noise level, augmentation and noise field of the patch at position
//! `p` of epoch `e` come from a generator keyed by `(seed, e, p)`. Batches can
//! therefore be produced out of order, in parallel, or after seeking to the
//! step a resumed run stopped at, and still match a sequential pass exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::GrayImage;
use super::noise::add_noise_with;
use super::patches::{augment_into, PatchOrigin, PatchSet};
use crate::nn::{Shape, Tensor};
use crate::{par, rng, Error, Result};

pub const BLIND_SIGMA_MAX: f32 = 70.0;

fn default_blind_max() -> f32 {
    BLIND_SIGMA_MAX
}

/// Noise levels seen during training (0-255 scale).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaRegime {
    /// Every patch gets the same sigma.
    Single { sigma: f32 },
    /// Each patch draws sigma uniformly from `[0, max]`.
    Blind {
        #[serde(default = "default_blind_max")]
        max: f32,
    },
}

impl SigmaRegime {
    pub fn blind() -> Self {
        SigmaRegime::Blind { max: BLIND_SIGMA_MAX }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            SigmaRegime::Single { sigma } => sigma,
            SigmaRegime::Blind { max } => max,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("noise level must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match *self {
            SigmaRegime::Single { sigma } => format!("{sigma}"),
            SigmaRegime::Blind { max } => format!("0-{max}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamConfig {
    pub regime: SigmaRegime,
    pub patch_size: usize,
    pub stride: usize,
    pub batch: usize,
    /// Apply a random dihedral transform to each patch.
    pub augment: bool,
    pub seed: u64,
}

impl StreamConfig {
    /// Patch 64, stride 32, batch 32, no augmentation.
    pub fn new(regime: SigmaRegime, seed: u64) -> Self {
        StreamConfig {
            regime,
            patch_size: 64,
            stride: 32,
            batch: 32,
            augment: false,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub noisy: Tensor,
    pub clean: Tensor,
    pub sigmas: Vec<f32>,
    pub origins: Vec<PatchOrigin>,
}

#[derive(Clone, Debug)]
pub struct TrainingStream {
    patches: PatchSet,
    config: StreamConfig,
    position: u64,
}

pub fn make_training_stream(corpus: &[GrayImage], config: StreamConfig) -> Result<TrainingStream> {
    TrainingStream::new(corpus, config)
}

impl TrainingStream {
    pub fn new(corpus: &[GrayImage], config: StreamConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("training corpus has no images".into()));
        }
        config.regime.validate()?;
        if config.batch == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        let patches = PatchSet::from_images(corpus, config.patch_size, config.stride)?;
        if config.batch > patches.len() {
            return Err(Error::Config(format!(
                "batch of {} exceeds the {} available patches",
                config.batch,
                patches.len()
            )));
        }
        Ok(TrainingStream {
            patches,
            config,
            position: 0,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    /// Full batches per pass over the patches; a ragged tail is dropped.
    pub fn batches_per_epoch(&self) -> u64 {
        (self.patches.len() / self.config.batch) as u64
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Makes the next call to `next()` return batch `index`.
    pub fn seek(&mut self, index: u64) {
        self.position = index;
    }

    fn permutation(&self, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.patches.len()).collect();
        let mut r = rng::derive(self.config.seed, &[rng::DOMAIN_PERMUTATION, epoch]);
        order.shuffle(&mut r);
        order
    }

    /// Batch number `index` of the stream.
    pub fn batch_at(&self, index: u64) -> Batch {
        let cfg = &self.config;
        let bpe = self.batches_per_epoch();
        let (epoch, k) = (index / bpe, (index % bpe) as usize);
        let order = self.permutation(epoch);
        let s = self.patches.size();
        let items = par::map(cfg.batch, |j| {
            let pos = k * cfg.batch + j;
            let slot = order[pos];
            let mut r = rng::derive(cfg.seed, &[rng::DOMAIN_PATCH, epoch, pos as u64]);
            let sigma = match cfg.regime {
                SigmaRegime::Single { sigma } => sigma,
                SigmaRegime::Blind { max } => r.random_range(0.0..=max),
            };
            let code = if cfg.augment { r.random_range(0..8u8) } else { 0 };
            let mut clean = vec![0.0; s * s];
            augment_into(self.patches.patch(slot), s, code, &mut clean);
            let mut noisy = clean.clone();
            add_noise_with(&mut noisy, sigma, &mut r).expect("regime validated");
            let origin = PatchOrigin {
                augmentation: code,
                ..self.patches.provenance[slot]
            };
            (clean, noisy, sigma, origin)
        });
        let shape = Shape::new(cfg.batch, 1, s, s).expect("validated sizes");
        let mut clean = Vec::with_capacity(shape.numel());
        let mut noisy = Vec::with_capacity(shape.numel());
        let mut sigmas = Vec::with_capacity(cfg.batch);
        let mut origins = Vec::with_capacity(cfg.batch);
        for (c, n, sigma, o) in items {
            clean.extend(c);
            noisy.extend(n);
            sigmas.push(sigma);
            origins.push(o);
        }
        Batch {
            noisy: Tensor::from_vec(shape, noisy).expect("sizes agree"),
            clean: Tensor::from_vec(shape, clean).expect("sizes agree"),
            sigmas,
            origins,
        }
    }
}

impl Iterator for TrainingStream {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        let b = self.batch_at(self.position);
        self.position += 1;
        Some(b)
    }
}
