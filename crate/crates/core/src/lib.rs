//! Complexity-compensated out-of-distribution scoring.
//!
//! The score of an input `x` is `S(x) = -l(x) - L(x)`, where `-l(x)` is the
//! negative log2-likelihood of `x` under a density model (bits per dimension)
//! and `L(x)` is the length of a lossless compression of `x` (also bits per
//! dimension). Higher `S` means more out-of-distribution.
//!
//! The crate is organized around that pipeline:
//!
//! - [`image`]: the fixed 3x32x32 byte tensor all inputs are normalized to,
//!   plus bilinear resizing and average-pool/upsample transforms.
//! - [`data`]: synthetic dataset generation, deterministic splits, manifests,
//!   and NLL file ingestion.
//! - [`codecs`]: lossless compressors producing `L(x)` (a PNG-style
//!   filter+DEFLATE codec, an adaptive arithmetic coder, and an external
//!   command adapter).
//! - [`density`]: a context model with exact log2-likelihoods, trained by
//!   counting.
//! - [`score`]: `S` itself and the practical decision strategies built on it.
//! - [`eval`]: AUROC, correlation, pooling sweeps, and report emission.
//!
//! Scalar-generic math is written over [`real::Real`] (any `f32`/`f64`-like
//! float); the aliases below fix the default `f64` instantiations.

pub mod codecs;
pub mod data;
pub mod density;
pub mod error;
pub mod eval;
pub mod image;
pub mod real;
pub mod score;

pub use error::{Error, Result};

/// Channels of the normalized input tensor.
pub const IMG_CHANNELS: usize = 3;
/// Side length of the normalized input tensor.
pub const IMG_SIDE: usize = 32;
/// Total dimensionality d = channels * height * width.
pub const IMG_DIM: usize = IMG_CHANNELS * IMG_SIDE * IMG_SIDE;

/// Default scalar type for end-to-end pipelines.
pub type Scalar = f64;
/// Context model over the default scalar.
pub type ContextModel = density::ContextModel<Scalar>;
/// Score record over the default scalar.
pub type ScoreRecord = score::ScoreRecord<Scalar>;
