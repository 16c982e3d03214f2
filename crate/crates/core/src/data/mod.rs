//! Everything between image files and training/evaluation tensors.

mod corpus;
mod image;
mod noise;
mod patches;
mod stream;

pub use corpus::{image_id, load_corpus, load_manifest, NamedImage};
pub use image::{decode, decode_pgm, decode_png, encode_pgm, encode_png, load_gray, save_gray, GrayImage};
pub use noise::{add_awgn, ImagePair};
pub use patches::{augment, extract_patches, patch_count, PatchOrigin, PatchSet};
pub use stream::{make_training_stream, Batch, SigmaRegime, StreamConfig, TrainingStream, BLIND_SIGMA_MAX};

pub(crate) use image::quantize;
