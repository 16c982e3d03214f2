//! WIN5, WIN5-R and WIN5-RB.
//!
//! Every variant is `L` same-padded `F x F` convolutions mapping 1 -> K -> ...
//! -> K -> 1 channels with ReLU after all but the last layer. WIN5-RB inserts
//! batch norm after every convolution, the last one included; WIN5-R and
//! WIN5-RB add the noisy input to the body output, so the body learns the
//! negated noise and the model returns `y + R(y)`. WIN5 regresses the clean
//! image directly.

mod checkpoint;
mod config;
mod model;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, TrainingMeta, CHECKPOINT_EXTENSION, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{receptive_field, ModelConfig, Variant};
pub use model::{build_model, ForwardCache, Layer, LayerGrads, Model, ModelGrads};
