//! Federated-learning simulator with shadow-model membership inference.
//!
//! The crate trains a classifier centrally or by federated averaging, trains
//! shadow models on attacker-side data, builds sample-wise or batch-wise
//! attack datasets from them and measures how well the resulting attack model
//! separates the target's training records from unseen ones.

pub mod attack;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod federated;
pub mod numerics;
pub mod rng;
pub mod shadow;

pub use error::{Error, Result};
