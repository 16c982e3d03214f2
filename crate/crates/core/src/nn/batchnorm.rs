//! Per-channel batch normalization.
//!
//! Train mode normalizes by the statistics of the current batch over
//! `(n, h, w)` and folds them into the running estimates; infer mode uses the
//! running estimates only. The running mean and variance are what a trained
//! WIN5-RB carries forward as its learned prior on pixel statistics.

use super::tensor::Tensor;
use crate::{par, Error, Result};

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Affine parameters and running statistics for `C` channels.
///
/// Running statistics are updated as
/// `running = momentum * running + (1 - momentum) * batch`, using the biased
/// batch variance. Empty running vectors mean "not yet initialized".
#[derive(Clone, Debug, PartialEq)]
pub struct BnParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub eps: f32,
    pub momentum: f32,
}

/// What the backward pass needs from a train-mode forward.
#[derive(Clone, Debug)]
pub struct BnCache {
    pub(crate) x_hat: Tensor,
    pub(crate) inv_std: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct BnGrads {
    pub input: Tensor,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl BnParams {
    /// gamma 1, beta 0, running mean 0, running variance 1.
    pub fn new(channels: usize) -> Self {
        BnParams {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn has_running_stats(&self) -> bool {
        let c = self.channels();
        self.running_mean.len() == c && self.running_var.len() == c
    }

    fn check(&self, c: usize) -> Result<()> {
        if self.beta.len() != self.gamma.len() {
            return Err(Error::shape("gamma and beta lengths differ"));
        }
        if c != self.channels() {
            return Err(Error::shape(format!(
                "batch norm over {} channels applied to {c}",
                self.channels()
            )));
        }
        Ok(())
    }
}

/// Dispatches on `mode`. Only train mode mutates `p` and returns a cache.
pub fn batchnorm_forward(input: &Tensor, p: &mut BnParams, mode: Mode) -> Result<(Tensor, Option<BnCache>)> {
    match mode {
        Mode::Train => batchnorm_forward_train(input, p).map(|(y, c)| (y, Some(c))),
        Mode::Infer => batchnorm_forward_infer(input, p).map(|y| (y, None)),
    }
}

pub fn batchnorm_forward_train(input: &Tensor, p: &mut BnParams) -> Result<(Tensor, BnCache)> {
    let s = input.shape();
    p.check(s.c)?;
    let hw = s.plane();
    let count = (s.n * hw) as f64;

    let stats = par::map(s.c, |c| {
        let mut sum = 0.0f64;
        for n in 0..s.n {
            let base = input.index(n, c, 0, 0);
            sum += input.data()[base..base + hw].iter().map(|&v| v as f64).sum::<f64>();
        }
        let mean = sum / count;
        let mut sq = 0.0f64;
        for n in 0..s.n {
            let base = input.index(n, c, 0, 0);
            sq += input.data()[base..base + hw]
                .iter()
                .map(|&v| {
                    let d = v as f64 - mean;
                    d * d
                })
                .sum::<f64>();
        }
        (mean, sq / count)
    });

    let inv_std: Vec<f32> = stats
        .iter()
        .map(|&(_, var)| (1.0 / (var + p.eps as f64).sqrt()) as f32)
        .collect();
    let mut x_hat = Tensor::zeros(s);
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let base = input.index(n, c, 0, 0);
            let (mean, istd) = (stats[c].0 as f32, inv_std[c]);
            let (g, b) = (p.gamma[c], p.beta[c]);
            let src = &input.data()[base..base + hw];
            let xh = &mut x_hat.data_mut()[base..base + hw];
            for (d, &v) in xh.iter_mut().zip(src) {
                *d = (v - mean) * istd;
            }
            for (o, &v) in out.data_mut()[base..base + hw].iter_mut().zip(&x_hat.data()[base..base + hw]) {
                *o = g * v + b;
            }
        }
    }

    if !p.has_running_stats() {
        p.running_mean = vec![0.0; s.c];
        p.running_var = vec![1.0; s.c];
    }
    let m = p.momentum;
    for (c, &(mean, var)) in stats.iter().enumerate() {
        p.running_mean[c] = m * p.running_mean[c] + (1.0 - m) * mean as f32;
        p.running_var[c] = m * p.running_var[c] + (1.0 - m) * var as f32;
    }
    Ok((out, BnCache { x_hat, inv_std }))
}

pub fn batchnorm_forward_infer(input: &Tensor, p: &BnParams) -> Result<Tensor> {
    let s = input.shape();
    p.check(s.c)?;
    if !p.has_running_stats() {
        return Err(Error::UninitializedStats);
    }
    let hw = s.plane();
    let scale: Vec<f32> = (0..s.c)
        .map(|c| p.gamma[c] / (p.running_var[c] + p.eps).sqrt())
        .collect();
    let mut out = input.clone();
    for (i, plane) in out.data_mut().chunks_mut(hw).enumerate() {
        let c = i % s.c;
        let (mean, k, b) = (p.running_mean[c], scale[c], p.beta[c]);
        for v in plane.iter_mut() {
            *v = (*v - mean) * k + b;
        }
    }
    Ok(out)
}

/// Adjoint of the train-mode transformation, batch-statistics paths included:
/// `dx = gamma * inv_std / N * (N * dy - sum(dy) - x_hat * sum(dy * x_hat))`.
pub fn batchnorm_backward(grad_out: &Tensor, cache: &BnCache, p: &BnParams) -> Result<BnGrads> {
    let s = grad_out.shape();
    p.check(s.c)?;
    cache.x_hat.expect_shape(s, "batch norm grad_out")?;
    let hw = s.plane();
    let count = (s.n * hw) as f64;

    let sums = par::map(s.c, |c| {
        let (mut sum_dy, mut sum_dy_xh) = (0.0f64, 0.0f64);
        for n in 0..s.n {
            let base = grad_out.index(n, c, 0, 0);
            let dy = &grad_out.data()[base..base + hw];
            let xh = &cache.x_hat.data()[base..base + hw];
            for (&g, &x) in dy.iter().zip(xh) {
                sum_dy += g as f64;
                sum_dy_xh += g as f64 * x as f64;
            }
        }
        (sum_dy, sum_dy_xh)
    });

    let mut dx = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let base = grad_out.index(n, c, 0, 0);
            let (sum_dy, sum_dy_xh) = sums[c];
            let k = p.gamma[c] as f64 * cache.inv_std[c] as f64 / count;
            let dy = &grad_out.data()[base..base + hw];
            let xh = &cache.x_hat.data()[base..base + hw];
            for ((d, &g), &x) in dx.data_mut()[base..base + hw].iter_mut().zip(dy).zip(xh) {
                *d = (k * (count * g as f64 - sum_dy - x as f64 * sum_dy_xh)) as f32;
            }
        }
    }
    Ok(BnGrads {
        input: dx,
        gamma: sums.iter().map(|&(_, v)| v as f32).collect(),
        beta: sums.iter().map(|&(v, _)| v as f32).collect(),
    })
}
