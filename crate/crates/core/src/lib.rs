//! Desk-scale dual-granularity contrastive image-text training.
//!
//! - [`tensor`]: rank-2 tensors and a taped reverse-mode graph
//! - [`model`]: text and image towers, stretched positional embeddings, checkpoints
//! - [`objective`]: InfoNCE, the long/short weighted loss, curriculum schedule
//! - [`datagen`]: synthetic scenes, templated captions, dataset files
//! - [`eval`]: retrieval recall, zero-shot classification, semantic localization
//! - [`harness`]: SGD, training loop, configuration, ablations

pub mod datagen;
pub mod error;
pub mod eval;
pub mod grid;
pub mod harness;
pub mod model;
pub mod objective;
pub mod tensor;

pub use error::{Error, Result};
