//! EEG-style intent recognition: similarity analysis of labelled feature
//! vectors, an autoencoder for feature extraction, and gradient-boosted
//! trees for classification.

pub mod autoencoder;
pub mod boost;
pub mod data;
pub mod error;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod rng;
pub mod similarity;

pub use data::{Dataset, LabeledSample};
pub use error::{Error, ErrorKind, Result};
pub use normalize::NormalizationMethod;
