//! Always-sparse dynamic sparse training engine.
//!
//! Weights exist only as per-layer active connection sets; the dense weight
//! matrix is never materialized. Training periodically prunes low-magnitude
//! connections and grows new ones selected by gradient magnitude from a
//! randomly sampled candidate subset (guided stochastic exploration), with
//! static, random-growth, and dense-gradient baselines for comparison.

pub mod bench;
pub mod data;
pub mod dst;
pub mod exp;
pub mod nn;
pub mod sparse;

/// Scalar type for all numeric work. Defaults to `f64`; the `f32` feature
/// switches benchmark builds to single precision.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

/// Dense matrix of [`Real`], standard (row-major) layout throughout.
pub type Mat = ndarray::Array2<Real>;
