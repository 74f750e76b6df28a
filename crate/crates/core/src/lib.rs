//! Layerwise semantic reconstruction out-of-distribution detection over
//! classifier activation-vector (AV) features.
//!
//! The pipeline is:
//!
//! 1. [`data`] loads or synthesizes a [`FeatureSet`] of penultimate-layer features.
//! 2. [`detector::train`] fits a one-layer softmax encoder `W` together with two
//!    small decoders: `D1` rebuilds the feature from the logits `Wv`, `D2` rebuilds
//!    the temperature-scaled logits from their softmax.
//! 3. [`detector::fit_gaussians`] calibrates one Gaussian per score factor on
//!    held-out in-distribution features.
//! 4. [`scoring::normality_score`] multiplies a confidence CDF with two
//!    reconstruction-residual CCDFs into a normality score in `[0, 1]`.
//! 5. [`metrics`] evaluates ID-vs-OoD separation.
//!
//! [`affine`] decomposes the ReLU reconstruction path into its local affine
//! map and checks the residual bound that motivates norm-normalized residuals.

pub mod affine;
pub mod data;
pub mod detector;
mod error;
pub mod metrics;
pub mod nn;
pub mod scoring;

pub use data::FeatureSet;
pub use detector::{Calibration, DetectorModel, GaussianFit, TrainConfig};
pub use error::{Error, Result};
pub use metrics::EvalReport;
pub use scoring::ScoreBundle;
