//! Optimization loop, evaluation harness and noise-level curves.

mod adam;
mod config;
mod eval;
mod train;

pub use adam::{adam_step, AdamConfig, OptState};
pub use config::{LrDecay, TrainConfig};
pub use eval::{
    behavior_curve, curve_csv, denoise_image, eval_noise_seed, evaluate, evaluate_noisy, evaluate_with, CurvePoint,
};
pub use train::{train, EpochRecord, StepRecord, TrainLog, Trainer};
