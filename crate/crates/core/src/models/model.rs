use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ModelConfig;
use crate::nn::{
    self, add, batchnorm_backward, batchnorm_forward_infer, batchnorm_forward_train, conv2d_backward_params,
    conv2d_forward, relu_backward, relu_forward, BnCache, BnParams, ConvParams, Mode, Tensor,
};
use crate::{Error, Result};

/// One Conv[+BN][+ReLU] stage. ReLU follows every layer but the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub conv: ConvParams,
    pub bn: Option<BnParams>,
}

/// A built network: configuration plus its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    layers: Vec<Layer>,
}

/// Activations retained by a train-mode forward pass.
#[derive(Debug)]
pub struct ForwardCache {
    /// Input to each layer's convolution; entry 0 is the network input.
    inputs: Vec<Tensor>,
    bn: Vec<Option<BnCache>>,
}

#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub weights: Tensor,
    pub bias: Vec<f32>,
    pub gamma: Option<Vec<f32>>,
    pub beta: Option<Vec<f32>>,
}

/// Gradients for every learnable array, in [`Model::params`] order.
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub layers: Vec<LayerGrads>,
}

impl ModelGrads {
    pub fn arrays(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weights.data());
            out.push(&l.bias[..]);
            if let (Some(g), Some(b)) = (&l.gamma, &l.beta) {
                out.push(&g[..]);
                out.push(&b[..]);
            }
        }
        out
    }
}

/// Builds a model with He-normal conv weights (`std = sqrt(2 / (F^2 C_in))`),
/// zero biases, gamma 1, beta 0 and running statistics (0, 1).
pub fn build_model(cfg: ModelConfig, seed: u64) -> Result<Model> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let (cin, cout) = cfg.channels(l);
        let mut conv = ConvParams::zeros(cin, cout, cfg.kernel)?;
        let std = (2.0 / (cfg.kernel * cfg.kernel * cin) as f64).sqrt();
        for w in conv.weights.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = (z * std) as f32;
        }
        let bn = cfg.variant.has_batchnorm().then(|| BnParams::new(cout));
        layers.push(Layer { conv, bn });
    }
    Ok(Model { config: cfg, layers })
}

impl Model {
    /// Assembles a model from existing parameters, checking them against
    /// `config`.
    pub fn from_layers(config: ModelConfig, layers: Vec<Layer>) -> Result<Model> {
        config.validate()?;
        if layers.len() != config.layers {
            return Err(Error::Config(format!(
                "{} layers supplied for a {}-layer config",
                layers.len(),
                config.layers
            )));
        }
        for (l, layer) in layers.iter().enumerate() {
            let (cin, cout) = config.channels(l);
            let c = &layer.conv;
            if c.k_in() != cin || c.k_out() != cout || c.kernel() != config.kernel {
                return Err(Error::Config(format!("layer {l} conv does not match the config")));
            }
            match (&layer.bn, config.variant.has_batchnorm()) {
                (Some(bn), true) if bn.channels() == cout => {}
                (None, false) => {}
                _ => return Err(Error::Config(format!("layer {l} batch norm does not match the config"))),
            }
        }
        Ok(Model { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_learnable(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Learnable arrays in checkpoint order: per layer conv weights, conv
    /// bias, then gamma and beta when batch norm is present.
    pub fn params(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.conv.weights.data());
            out.push(&l.conv.bias[..]);
            if let Some(bn) = &l.bn {
                out.push(&bn.gamma[..]);
                out.push(&bn.beta[..]);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.conv.weights.data_mut());
            out.push(&mut l.conv.bias[..]);
            if let Some(bn) = &mut l.bn {
                out.push(&mut bn.gamma[..]);
                out.push(&mut bn.beta[..]);
            }
        }
        out
    }

    fn check_input(&self, y: &Tensor) -> Result<()> {
        if y.shape().c != self.config.input_channels {
            return Err(Error::shape(format!(
                "model expects {} input channel(s), got {}",
                self.config.input_channels,
                y.shape().c
            )));
        }
        Ok(())
    }

    /// Runs the network in the requested mode. Train mode updates batch-norm
    /// running statistics and returns the cache [`Model::backward`] needs.
    pub fn forward(&mut self, y: &Tensor, mode: Mode) -> Result<(Tensor, Option<ForwardCache>)> {
        match mode {
            Mode::Train => self.forward_train(y).map(|(out, cache)| (out, Some(cache))),
            Mode::Infer => self.infer(y).map(|out| (out, None)),
        }
    }

    /// Inference-mode forward. Never mutates the model.
    pub fn infer(&self, y: &Tensor) -> Result<Tensor> {
        self.check_input(y)?;
        let last = self.layers.len() - 1;
        let mut x = None::<Tensor>;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = conv2d_forward(x.as_ref().unwrap_or(y), &layer.conv)?;
            if let Some(bn) = &layer.bn {
                h = batchnorm_forward_infer(&h, bn)?;
            }
            if l < last {
                h = relu_forward(&h);
            }
            x = Some(h);
        }
        let body = x.expect("at least two layers");
        if self.config.variant.has_skip() {
            add(y, &body)
        } else {
            Ok(body)
        }
    }

    pub fn forward_train(&mut self, y: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(y)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut bn_caches = Vec::with_capacity(self.layers.len());
        inputs.push(y.clone());
        let mut body = None;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let mut h = conv2d_forward(&inputs[l], &layer.conv)?;
            let cache = match &mut layer.bn {
                Some(bn) => {
                    let (out, cache) = batchnorm_forward_train(&h, bn)?;
                    h = out;
                    Some(cache)
                }
                None => None,
            };
            bn_caches.push(cache);
            if l < last {
                inputs.push(relu_forward(&h));
            } else {
                body = Some(h);
            }
        }
        let body = body.expect("at least two layers");
        let out = if self.config.variant.has_skip() { add(y, &body)? } else { body };
        Ok((out, ForwardCache { inputs, bn: bn_caches }))
    }

    /// Backpropagates `grad_out` (gradient of the loss with respect to the
    /// model output) to every learnable parameter.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Tensor) -> Result<ModelGrads> {
        let n_layers = self.layers.len();
        if cache.inputs.len() != n_layers || cache.bn.len() != n_layers {
            return Err(Error::MissingCache("forward cache does not belong to this model"));
        }
        grad_out.expect_shape(cache.inputs[0].shape(), "model grad_out")?;
        // With the skip, d(y + body)/d(body) is the identity; the input
        // gradient through the skip is not needed.
        let mut grad = grad_out.clone();
        let mut out: Vec<Option<LayerGrads>> = vec![None; n_layers];
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            if l + 1 < n_layers {
                grad = relu_backward(&grad, &cache.inputs[l + 1])?;
            }
            let (mut gamma, mut beta) = (None, None);
            if let Some(bn) = &layer.bn {
                let bc = cache.bn[l]
                    .as_ref()
                    .ok_or(Error::MissingCache("batch norm statistics"))?;
                let g = batchnorm_backward(&grad, bc, bn)?;
                grad = g.input;
                gamma = Some(g.gamma);
                beta = Some(g.beta);
            }
            let (weights, bias) = if l > 0 {
                let g = nn::conv2d_backward(&grad, &cache.inputs[l], &layer.conv)?;
                grad = g.input;
                (g.weights, g.bias)
            } else {
                conv2d_backward_params(&grad, &cache.inputs[0], &layer.conv)?
            };
            out[l] = Some(LayerGrads { weights, bias, gamma, beta });
        }
        Ok(ModelGrads {
            layers: out.into_iter().map(|g| g.expect("filled above")).collect(),
        })
    }
}
