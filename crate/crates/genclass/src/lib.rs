//! GenClass: a generator-classifier engine for generalized zero-shot
//! classification.
//!
//! A conditional WGAN-GP generator is trained end to end with a pairwise
//! similarity classifier; at test time classes are represented by prototypes
//! averaged from generated features, so new classes need no retraining.

pub mod autodiff;
pub mod baseline;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod inference;
pub mod losses;
pub mod matrix;
pub mod models;
pub mod pairing;
pub mod trainer;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use matrix::Matrix;
