//! Content/style disentanglement over precomputed joint image embeddings.
//!
//! Two encoders map a frozen joint embedding into a content space and a style
//! space. They are trained with pairwise contrastive objectives: content
//! positives come from near-duplicate text-description embeddings, style
//! positives from shared style tags, plus an optional style classifier.
//! Evaluation covers distance correlation between the two spaces, linear
//! probes and cosine top-k retrieval.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); training runs in
//! `f64` and files store `f32`. The aliases below name the common
//! instantiations.

mod binio;
pub mod cli;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = tensor::Matrix<f64>;
pub type Matrix32 = tensor::Matrix<f32>;
pub type GoyaModel64 = model::GoyaModel<f64>;
pub type GoyaModel32 = model::GoyaModel<f32>;
pub type OptimizerState64 = tensor::OptimizerState<f64>;
