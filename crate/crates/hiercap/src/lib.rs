//! File formats, synthetic corpora, run configuration and the command-line
//! surface on top of `hiercap-core`.

mod bytes;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod synth;
pub mod text;
pub mod vfea;

pub use error::{Error, Result};
