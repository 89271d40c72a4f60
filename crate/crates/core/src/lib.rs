//! Differentiable core for boundary-aware hierarchical video captioning.
//!
//! Everything here is `no_std` + `alloc`: a reverse-mode tape over dense
//! `f64` tensors, recurrent cells (GRU, boundary-aware encoder, binary-gated
//! GRU), shared soft attention, the captioning and video-prediction paths,
//! greedy/beam decoding, Adam training with path-specific freezing, and
//! BLEU-4 / CIDEr / boundary metrics.

#![no_std]

extern crate alloc;

pub mod attention;
pub mod cells;
pub mod decode;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
pub use params::{Grads, ParamId, ParamRegistry};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
