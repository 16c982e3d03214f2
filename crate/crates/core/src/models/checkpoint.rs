//! `.winckpt` checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    7 bytes  "WINCKPT"
//! version  u8       1
//! header   u32 length + UTF-8 JSON {"config", "meta", "optimizer"}
//! arrays   per layer: conv weights, conv bias, then gamma, beta,
//!          running_mean, running_var when batch norm is present;
//!          each array is a u32 element count followed by f32 values
//! optimizer (when "optimizer" is true): u64 step, then the first-moment
//!          arrays and the second-moment arrays in learnable-parameter order
//! ```
//!
//! Nothing may follow the last array.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::{Layer, Model};
use crate::data::SigmaRegime;
use crate::nn::{BnParams, ConvParams, Shape, Tensor};
use crate::trainer::OptState;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"WINCKPT";
pub const CHECKPOINT_VERSION: u8 = 1;
pub const CHECKPOINT_EXTENSION: &str = "winckpt";

/// Where a checkpoint sits in its training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub epoch: u64,
    pub step: u64,
    pub sigma_regime: Option<SigmaRegime>,
    pub seed: u64,
}

#[derive(Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<OptState>,
    pub meta: TrainingMeta,
}

impl fmt::Debug for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Checkpoint")
            .field("config", self.model.config())
            .field("optimizer", &self.optimizer.as_ref().map(|o| o.step))
            .field("meta", &self.meta)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    meta: TrainingMeta,
    optimizer: bool,
}

impl Checkpoint {
    /// A checkpoint of an untrained (or externally modified) model.
    pub fn from_model(model: Model) -> Self {
        Checkpoint {
            model,
            optimizer: None,
            meta: TrainingMeta::default(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            config: *self.model.config(),
            meta: self.meta.clone(),
            optimizer: self.optimizer.is_some(),
        })?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for layer in self.model.layers() {
            put_array(&mut out, layer.conv.weights.data());
            put_array(&mut out, &layer.conv.bias);
            if let Some(bn) = &layer.bn {
                put_array(&mut out, &bn.gamma);
                put_array(&mut out, &bn.beta);
                put_array(&mut out, &bn.running_mean);
                put_array(&mut out, &bn.running_var);
            }
        }
        if let Some(opt) = &self.optimizer {
            out.extend_from_slice(&opt.step.to_le_bytes());
            for a in opt.first_moment.iter().chain(&opt.second_moment) {
                put_array(&mut out, a);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(CHECKPOINT_MAGIC.len(), "magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.take(1, "version")?[0];
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let len = r.u32("header length")? as usize;
        let header: Header = serde_json::from_slice(r.take(len, "header")?)
            .map_err(|e| Error::Corrupt(format!("header: {e}")))?;
        let cfg = header.config;
        cfg.validate().map_err(|e| Error::Corrupt(e.to_string()))?;

        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let (cin, cout) = cfg.channels(l);
            let wshape = Shape::new(cout, cin, cfg.kernel, cfg.kernel)?;
            let weights = Tensor::from_vec(wshape, r.array(wshape.numel(), "conv weights")?)?;
            let conv = ConvParams::new(weights, r.array(cout, "conv bias")?)?;
            let bn = if cfg.variant.has_batchnorm() {
                let mut bn = BnParams::new(cout);
                bn.gamma = r.array(cout, "gamma")?;
                bn.beta = r.array(cout, "beta")?;
                bn.running_mean = r.array(cout, "running mean")?;
                bn.running_var = r.array(cout, "running variance")?;
                Some(bn)
            } else {
                None
            };
            layers.push(Layer { conv, bn });
        }
        let model = Model::from_layers(cfg, layers)?;

        let optimizer = if header.optimizer {
            let step = u64::from_le_bytes(r.take(8, "optimizer step")?.try_into().unwrap());
            let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
            let mut read_all = |what| -> Result<Vec<Vec<f32>>> { sizes.iter().map(|&n| r.array(n, what)).collect() };
            let first_moment = read_all("first moment")?;
            let second_moment = read_all("second moment")?;
            Some(OptState {
                step,
                first_moment,
                second_moment,
            })
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(Error::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint {
            model,
            optimizer,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::from(e).at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::from(e).at_path(path))?;
        Checkpoint::from_bytes(&bytes).map_err(|e| e.at_path(path))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    ckpt.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}

fn put_array(out: &mut Vec<u8>, values: &[f32]) {
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!("checkpoint ends inside {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn array(&mut self, expected: usize, what: &str) -> Result<Vec<f32>> {
        let n = self.u32(what)? as usize;
        if n != expected {
            return Err(Error::Corrupt(format!("{what}: {n} values, expected {expected}")));
        }
        let raw = self.take(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}
