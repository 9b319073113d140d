//! Anomaly detection for categorical alarm logs: supervised entity
//! embeddings, PCA projection, and Gaussian-mixture cluster labeling, with
//! tree-ensemble baselines and a precision-targeted evaluation harness.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases at the crate root pin the shipped `f64` configuration.

pub mod baselines;
pub mod clustering;
pub mod data_model;
pub mod embedding_net;
pub mod error;
pub mod evaluation;
pub mod feature_selection;
pub mod linalg;
pub mod mat;
pub mod pca;
pub mod persist;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};

/// Scalar type used by the shipped pipeline.
pub type Real = f64;
/// Dense matrix over the shipped scalar type.
pub type Matrix = mat::Mat<Real>;
