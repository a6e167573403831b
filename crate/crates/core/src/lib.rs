//! Procedurally generated Raven-style abstract reasoning tasks over factored
//! ground-truth image models, disentanglement metrics for representation
//! vectors, a relation-network reasoner trained on those representations, and
//! the rank-correlation analyses tying the two together.

pub mod analysis;
pub mod error;
pub mod factor;
pub mod manifest;
pub mod metrics;
pub mod nn;
pub mod render;
pub mod repr;
pub mod rng;
pub mod rpm;
pub mod stats;
pub mod wren;

pub use error::{Error, Result};
