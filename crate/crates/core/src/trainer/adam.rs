use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn default_beta1() -> f32 {
    0.9
}
fn default_beta2() -> f32 {
    0.999
}
fn default_eps() -> f32 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "default_beta1")]
    pub beta1: f32,
    #[serde(default = "default_beta2")]
    pub beta2: f32,
    #[serde(default = "default_eps")]
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

/// Adam moment estimates, one array per parameter array.
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub step: u64,
    pub first_moment: Vec<Vec<f32>>,
    pub second_moment: Vec<Vec<f32>>,
}

impl OptState {
    pub fn new(sizes: &[usize]) -> Self {
        OptState {
            step: 0,
            first_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.first_moment.iter().map(|m| m.len()).collect()
    }
}

/// One bias-corrected Adam update.
///
/// Every gradient is checked before anything is touched: a non-finite value
/// aborts the step with [`Error::NonFiniteGradient`] and leaves parameters
/// and state unchanged.
pub fn adam_step(
    params: &mut [&mut [f32]],
    grads: &[&[f32]],
    state: &mut OptState,
    lr: f32,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::shape(format!(
            "{} parameter arrays, {} gradient arrays, {} moment arrays",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    for (i, ((p, g), m)) in params.iter().zip(grads).zip(&state.first_moment).enumerate() {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::shape(format!(
                "array {i}: {} parameters, {} gradients, {} moments",
                p.len(),
                g.len(),
                m.len()
            )));
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient { index: i });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = (1.0 - (cfg.beta1 as f64).powi(t)) as f32;
    let bc2 = (1.0 - (cfg.beta2 as f64).powi(t)) as f32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
