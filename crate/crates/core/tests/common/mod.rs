//! Independent reference implementations shared by the integration tests
//! and the acceptance runner.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use win_core::data::{load_corpus, NamedImage};
use win_core::models::{build_model, Model, ModelConfig, Variant};
use win_core::nn::{
    batchnorm_backward, batchnorm_forward_train, conv2d_backward, conv2d_forward, mse_loss, relu_backward,
    relu_forward, BnParams, ConvParams, Shape, Tensor,
};

pub const FD_STEP: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(r: &mut ChaCha8Rng, shape: Shape, lo: f32, hi: f32) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| r.random_range(lo..hi))
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn train_images() -> Vec<NamedImage> {
    load_corpus(data_dir().join("train.txt")).expect("training fixtures")
}

pub fn test_images() -> Vec<NamedImage> {
    load_corpus(data_dir().join("test.txt")).expect("test fixtures")
}

/// Direct four-deep loop over output positions, output channels, input
/// channels and taps, accumulated in f64.
pub fn naive_conv(input: &Tensor, weights: &Tensor, bias: &[f32]) -> Tensor {
    let s = input.shape();
    let ws = weights.shape();
    let pad = (ws.h / 2) as isize;
    Tensor::from_fn(Shape::new(s.n, ws.n, s.h, s.w).unwrap(), |n, k, i, j| {
        let mut acc = bias[k] as f64;
        for c in 0..s.c {
            for u in 0..ws.h {
                for v in 0..ws.w {
                    let y = i as isize + u as isize - pad;
                    let x = j as isize + v as isize - pad;
                    if y >= 0 && x >= 0 && (y as usize) < s.h && (x as usize) < s.w {
                        acc += weights.get(k, c, u, v) as f64 * input.get(n, c, y as usize, x as usize) as f64;
                    }
                }
            }
        }
        acc as f32
    })
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn dot(t: &Tensor, r: &Tensor) -> f64 {
    t.data().iter().zip(r.data()).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// Central differences of `loss` with respect to every entry of `x`.
fn fd_grad(x: &[f32], mut loss: impl FnMut(&[f32]) -> f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + FD_STEP as f32;
            let up = loss(&work);
            work[i] = orig - FD_STEP as f32;
            let down = loss(&work);
            work[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn small_shape(r: &mut ChaCha8Rng) -> Shape {
    Shape::new(
        r.random_range(1..=2),
        r.random_range(1..=3),
        r.random_range(3..=6),
        r.random_range(3..=6),
    )
    .unwrap()
}

/// Worst relative error over input, weight and bias gradients of a random
/// convolution.
pub fn conv_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = small_shape(&mut r);
    let k_out = r.random_range(1..=3);
    let f = [1, 3, 5][r.random_range(0..3)];
    let x = random_tensor(&mut r, s, -1.0, 1.0);
    let w = random_tensor(&mut r, Shape::new(k_out, s.c, f, f).unwrap(), -1.0, 1.0);
    let b: Vec<f32> = (0..k_out).map(|_| r.random_range(-1.0..1.0)).collect();
    let out_shape = Shape::new(s.n, k_out, s.h, s.w).unwrap();
    let probe = random_tensor(&mut r, out_shape, -1.0, 1.0);
    let p = ConvParams::new(w.clone(), b.clone()).unwrap();
    let g = conv2d_backward(&probe, &x, &p).unwrap();

    let dx = fd_grad(x.data(), |v| {
        dot(&conv2d_forward(&Tensor::from_vec(s, v.to_vec()).unwrap(), &p).unwrap(), &probe)
    });
    let dw = fd_grad(w.data(), |v| {
        let q = ConvParams::new(Tensor::from_vec(w.shape(), v.to_vec()).unwrap(), b.clone()).unwrap();
        dot(&conv2d_forward(&x, &q).unwrap(), &probe)
    });
    let db = fd_grad(&b, |v| {
        let q = ConvParams::new(w.clone(), v.to_vec()).unwrap();
        dot(&conv2d_forward(&x, &q).unwrap(), &probe)
    });
    rel_err(&widen(g.input.data()), &dx)
        .max(rel_err(&widen(g.weights.data()), &dw))
        .max(rel_err(&widen(&g.bias), &db))
}

/// Worst relative error over input, gamma and beta gradients of train-mode
/// batch normalization.
pub fn bn_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = small_shape(&mut r);
    let x = random_tensor(&mut r, s, -1.0, 1.0);
    let mut p = BnParams::new(s.c);
    p.gamma = (0..s.c).map(|_| r.random_range(0.5..1.5)).collect();
    p.beta = (0..s.c).map(|_| r.random_range(-0.5..0.5)).collect();
    let probe = random_tensor(&mut r, s, -1.0, 1.0);
    let base = p.clone();
    let (_, cache) = batchnorm_forward_train(&x, &mut p.clone()).unwrap();
    let g = batchnorm_backward(&probe, &cache, &base).unwrap();

    let eval = |x: &Tensor, p: &BnParams| dot(&batchnorm_forward_train(x, &mut p.clone()).unwrap().0, &probe);
    let dx = fd_grad(x.data(), |v| eval(&Tensor::from_vec(s, v.to_vec()).unwrap(), &base));
    let dgamma = fd_grad(&base.gamma, |v| {
        let mut q = base.clone();
        q.gamma = v.to_vec();
        eval(&x, &q)
    });
    let dbeta = fd_grad(&base.beta, |v| {
        let mut q = base.clone();
        q.beta = v.to_vec();
        eval(&x, &q)
    });
    rel_err(&widen(g.input.data()), &dx)
        .max(rel_err(&widen(&g.gamma), &dgamma))
        .max(rel_err(&widen(&g.beta), &dbeta))
}

/// ReLU gradient error; inputs stay at least 0.05 away from the kink.
pub fn relu_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = small_shape(&mut r);
    let x = Tensor::from_fn(s, |_, _, _, _| {
        let m = r.random_range(0.05f32..1.0);
        if r.random_bool(0.5) {
            m
        } else {
            -m
        }
    });
    let probe = random_tensor(&mut r, s, -1.0, 1.0);
    let g = relu_backward(&probe, &x).unwrap();
    let dx = fd_grad(x.data(), |v| dot(&relu_forward(&Tensor::from_vec(s, v.to_vec()).unwrap()), &probe));
    rel_err(&widen(g.data()), &dx)
}

pub fn mse_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = small_shape(&mut r);
    let pred = random_tensor(&mut r, s, -1.0, 1.0);
    let target = random_tensor(&mut r, s, -1.0, 1.0);
    let (_, g) = mse_loss(&pred, &target).unwrap();
    let dp = fd_grad(pred.data(), |v| {
        mse_loss(&Tensor::from_vec(s, v.to_vec()).unwrap(), &target).unwrap().0
    });
    rel_err(&widen(g.data()), &dp)
}

/// Relative error of the analytic directional derivative of a whole
/// train-mode network along a random parameter direction.
pub fn model_directional_error(seed: u64, variant: Variant) -> f64 {
    model_directional_pair(seed, variant, MODEL_FD_STEP).error()
}

pub const MODEL_FD_STEP: f64 = 3e-4;

pub struct Directional {
    pub analytic: f64,
    pub fd: f64,
}

impl Directional {
    pub fn error(&self) -> f64 {
        (self.analytic - self.fd).abs() / self.analytic.abs().max(self.fd.abs())
    }
}

/// Analytic and central-difference derivatives of the MSE loss of a small
/// network along a unit direction half gradient, half random.
pub fn model_directional_pair(seed: u64, variant: Variant, step: f64) -> Directional {
    let mut r = rng(seed);
    let cfg = ModelConfig::new(variant).with_width(3).with_kernel(3);
    let mut model = build_model(cfg, seed).unwrap();
    // Zero biases put dead receptive fields exactly on a ReLU kink.
    for layer in model.layers_mut() {
        layer.conv.bias.iter_mut().for_each(|b| *b = r.random_range(-0.2..0.2));
    }
    let s = Shape::new(2, 1, 6, 6).unwrap();
    let y = random_tensor(&mut r, s, 0.0, 1.0);
    let target = random_tensor(&mut r, s, 0.0, 1.0);

    let mut m = model.clone();
    let (out, cache) = m.forward_train(&y).unwrap();
    let (_, g) = mse_loss(&out, &target).unwrap();
    let grads: Vec<Vec<f64>> = m
        .backward(&cache, &g)
        .unwrap()
        .arrays()
        .iter()
        .map(|a| widen(a))
        .collect();
    let random: Vec<Vec<f64>> = grads
        .iter()
        .map(|a| a.iter().map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let norm = |v: &[Vec<f64>]| v.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let (gn, rn) = (norm(&grads), norm(&random));
    let mut dirs: Vec<Vec<f64>> = grads
        .iter()
        .zip(&random)
        .map(|(g, q)| g.iter().zip(q).map(|(a, b)| a / gn + b / rn).collect())
        .collect();
    let dn = norm(&dirs);
    dirs.iter_mut().flatten().for_each(|d| *d /= dn);

    let loss_at = |t: f64| -> f64 {
        let mut m: Model = model.clone();
        for (p, d) in m.params_mut().into_iter().zip(&dirs) {
            for (v, dv) in p.iter_mut().zip(d) {
                *v = (*v as f64 + t * dv) as f32;
            }
        }
        let (out, _) = m.forward_train(&y).unwrap();
        mse_loss(&out, &target).unwrap().0
    };
    let analytic = grads.iter().flatten().zip(dirs.iter().flatten()).map(|(a, b)| a * b).sum();
    let fd = (loss_at(step) - loss_at(-step)) / (2.0 * step);
    Directional { analytic, fd }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -1 - i } else { 2 * n - 1 - i };
    }
    i as usize
}

/// Mean SSIM by explicit 11x11 weighted sums at every pixel.
pub fn ssim_direct(a: &[f64], b: &[f64], w: usize, h: usize) -> f64 {
    let radius = 5isize;
    let mut window = [[0.0f64; 11]; 11];
    let mut total_w = 0.0;
    for (u, row) in window.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            let du = u as f64 - 5.0;
            let dv = v as f64 - 5.0;
            *cell = (-(du * du + dv * dv) / (2.0 * 1.5 * 1.5)).exp();
            total_w += *cell;
        }
    }
    let clip = |v: f64| v.clamp(0.0, 1.0);
    let mut acc = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for u in -radius..=radius {
                for v in -radius..=radius {
                    let yy = reflect(y as isize + u, h);
                    let xx = reflect(x as isize + v, w);
                    let wt = window[(u + radius) as usize][(v + radius) as usize] / total_w;
                    let pa = clip(a[yy * w + xx]);
                    let pb = clip(b[yy * w + xx]);
                    ma += wt * pa;
                    mb += wt * pb;
                    saa += wt * pa * pa;
                    sbb += wt * pb * pb;
                    sab += wt * pa * pb;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            let c1 = 1e-4;
            let c2 = 9e-4;
            acc += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    acc / (w * h) as f64
}
