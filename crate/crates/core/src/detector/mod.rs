//! Encoder/decoder architecture, the training pipeline and validation
//! calibration.

mod calibrate;
mod io;
mod model;
mod train;

pub use calibrate::{fit_gaussians, Calibration, GaussianFit};
pub use io::{
    encode_model, load_model, parse_model, save_model, SavedDetector, MODEL_MAGIC, MODEL_VERSION,
};
pub use model::{default_hidden_width, DetectorModel};
pub use train::{learning_rate_at, train, EpochLog, TrainConfig, TrainLog};
