//! Scalar abstraction for the numeric parts of the crate.
//!
//! All model math (embedding training, PCA, clustering, tree ensembles,
//! evaluation) is generic over [`Scalar`]; the pipeline and persistence
//! layers pin `f64` through the aliases at the crate root.

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssignOps
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless widening to `f64` (identity for `f64`).
    fn to_f64_lossless(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

/// Shorthand for `S::from(x).unwrap()` on constants known to fit.
#[inline]
pub fn cast<S: Scalar>(x: f64) -> S {
    S::from(x).expect("constant representable in scalar type")
}
