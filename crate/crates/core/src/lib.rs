//! Identification of Gaussian vector autoregressive models from one-bit
//! measurements.
//!
//! Two estimation pipelines are provided. The thresholded scheme
//! ([`scheme1`]) quantizes every series at a non-zero level, recovers the
//! standard thresholds from bit frequencies and the correlations through the
//! generalized arcsine map, and identifies the model in absolute units. The
//! threshold-free scheme ([`scheme2`]) works from sign bits plus pairwise
//! magnitude comparisons and identifies the model class (noise covariance up
//! to scale). Supporting machinery: dense matrix routines, Gaussian special
//! functions, model simulation, quantization, and the Yule-Walker block
//! systems both schemes share.

pub mod error;
pub mod gaussians;
pub mod matrix;
pub mod model;
pub mod oracles;
pub mod quantize;
pub mod rng;
pub mod scheme1;
pub mod scheme2;
pub mod yule_walker;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{ModelClass, MomentSet, VarModel};
