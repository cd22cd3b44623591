//! Value-injection pipeline: survey scoring, target derivation, training-data
//! generation, prompt rendering, completion backends, and evaluation metrics.

pub mod backend;
pub mod corpus;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod io;
pub mod prompts;
pub mod rng;
pub mod targets;
pub mod values;

pub use error::{Error, ErrorKind, Result};
pub use values::{LikertLevel, PvqItem, ValueDistribution, ValueId};
