use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The three wide-network variants.
///
/// | variant | batch norm      | input-to-output skip |
/// |---------|-----------------|----------------------|
/// | WIN5    | no              | no                   |
/// | WIN5-R  | no              | yes                  |
/// | WIN5-RB | every layer     | yes                  |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "WIN5", alias = "win5")]
    Win5,
    #[serde(rename = "WIN5-R", alias = "win5_r", alias = "win5-r")]
    Win5R,
    #[serde(rename = "WIN5-RB", alias = "win5_rb", alias = "win5-rb")]
    Win5Rb,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Win5, Variant::Win5R, Variant::Win5Rb];

    pub fn has_batchnorm(self) -> bool {
        matches!(self, Variant::Win5Rb)
    }

    pub fn has_skip(self) -> bool {
        matches!(self, Variant::Win5R | Variant::Win5Rb)
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Win5 => "WIN5",
            Variant::Win5R => "WIN5-R",
            Variant::Win5Rb => "WIN5-RB",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "WIN5" => Ok(Variant::Win5),
            "WIN5-R" => Ok(Variant::Win5R),
            "WIN5-RB" => Ok(Variant::Win5Rb),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

fn default_layers() -> usize {
    5
}
fn default_width() -> usize {
    128
}
fn default_kernel() -> usize {
    7
}
fn default_channels() -> usize {
    1
}

/// Architecture description: `layers` same-padded `kernel x kernel`
/// convolutions, `width` channels between them, one channel in and out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default = "default_channels")]
    pub input_channels: usize,
}

impl ModelConfig {
    /// Full-size configuration: 5 layers, 128 channels, 7x7 kernels.
    pub fn new(variant: Variant) -> Self {
        ModelConfig {
            variant,
            layers: default_layers(),
            width: default_width(),
            kernel: default_kernel(),
            input_channels: default_channels(),
        }
    }

    pub fn with_width(mut self, width: usize) -> Self {
        self.width = width;
        self
    }

    pub fn with_kernel(mut self, kernel: usize) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Config(format!("need at least 2 layers, got {}", self.layers)));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(format!("kernel size must be odd, got {}", self.kernel)));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be at least 1".into()));
        }
        if self.input_channels != 1 {
            return Err(Error::Config(format!(
                "only single-channel images are supported, got {} channels",
                self.input_channels
            )));
        }
        Ok(())
    }

    /// `(in, out)` channel counts of layer `l`.
    pub fn channels(&self, l: usize) -> (usize, usize) {
        let cin = if l == 0 { self.input_channels } else { self.width };
        let cout = if l + 1 == self.layers { self.input_channels } else { self.width };
        (cin, cout)
    }

    /// Learnable scalars: conv weights and biases plus batch-norm gamma and
    /// beta. Running statistics are not counted.
    pub fn learnable_params(&self) -> usize {
        (0..self.layers)
            .map(|l| {
                let (cin, cout) = self.channels(l);
                let conv = self.kernel * self.kernel * cin * cout + cout;
                let bn = if self.variant.has_batchnorm() { 2 * cout } else { 0 };
                conv + bn
            })
            .sum()
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(self)
    }
}

/// Side of the input window that influences one output pixel: `1 + L(F - 1)`.
pub fn receptive_field(cfg: &ModelConfig) -> usize {
    1 + cfg.layers * (cfg.kernel - 1)
}
