//! Presence-only spatio-temporal priors for object categories.
//!
//! Given observation records of the form "category `y` was seen by
//! photographer `p` at longitude/latitude `x` on day-of-year `t`", with no
//! verified absences, this crate trains a compact model of `P(y | x, t)`:
//! a residual fully-connected location encoder over wrap-encoded coordinates
//! together with object and photographer embedding matrices, optimized with
//! a three-part pseudo-negative loss. The resulting prior multiplies into
//! the probabilistic output of any image classifier to resolve visually
//! ambiguous categories by where and when the image was taken.
//!
//! The crate also ships the reference baselines (uniform, nearest-neighbor
//! count and radius voting, discretized grid), an evaluation harness, a
//! synthetic-world generator for verifying the pipeline without external
//! data, and equirectangular raster export of per-category maps.
//!
//! Start with the runnable examples (`cargo run --release --example
//! train_synthetic`) or the `geoprior` binary, which exposes the same
//! pipeline as subcommands.

pub mod baselines;
pub mod data;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod inference;
pub mod loss;
pub mod model;
pub mod numcore;
pub mod trainer;

pub use embeddings::PriorVector;
pub use encoder::{SpatioTemporalPoint, VariantFlags};
pub use error::{Error, Result};
pub use model::{ModelParams, ModelShape};
pub use trainer::{Checkpoint, TrainConfig};
