//! Wide inference networks for grayscale image denoising.
//!
//! The crate is a small, self-contained training and evaluation stack for the
//! WIN5 family of wide convolutional denoisers:
//!
//! - [`nn`]: NCHW tensors and the forward/backward kernels the networks need
//!   (same-padded convolution, batch normalization, ReLU, add, MSE).
//! - [`models`]: the WIN5 / WIN5-R / WIN5-RB architectures and the `.winckpt`
//!   checkpoint format.
//! - [`data`]: PGM/PNG I/O, additive white Gaussian noise, patch extraction,
//!   dihedral augmentation and the seeded training stream.
//! - [`metrics`]: PSNR, SSIM, pixel histograms and CSV reports.
//! - [`trainer`]: Adam, the training loop, evaluation and noise-level curves.
//!
//! Data-parallel loops (batch samples, channels, evaluation images) run on
//! rayon when the `parallel` feature is enabled. Every reduction happens in a
//! fixed order, so results are bitwise identical with or without it.

pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod par;
pub mod trainer;

mod rng;

pub use error::{Error, Result};
pub use rng::derive_seed;
