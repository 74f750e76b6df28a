//! Minimal dense network engine: fully connected layers with ReLU, temperature
//! softmax, the detector's training loss with hand-written reverse-mode
//! gradients, Adam, and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod layer;
mod loss;
mod matrix;
pub(crate) mod softmax;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{
    grad_check, loss_value, CoordinateError, DetectorObjective, GradCheckReport, Objective,
    RegressionObjective, KINK_EPS,
};
pub use layer::{backward, forward, forward_value, Activation, FcLayer, ForwardCache, LayerGrad};
pub use loss::{loss_accumulate, loss_total, LossOptions, LossTerms, ModelGrads, ReconLoss};
pub use matrix::{dot, l2_norm, DenseMatrix};
pub use softmax::{log_softmax, softmax_t};

/// Residual norms below this are treated as zero: the norm's gradient becomes
/// the zero vector and NL2 refuses to normalize by them.
pub const NORM_GUARD: f64 = 1e-12;
