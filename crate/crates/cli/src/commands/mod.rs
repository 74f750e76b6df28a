pub mod eval;
pub mod score;
pub mod sweep;
pub mod synth;
pub mod train;
pub mod verify;

use std::path::Path;

use olsr_core::data::split;
use olsr_core::detector::{fit_gaussians, train as train_model, TrainLog};
use olsr_core::nn::DenseMatrix;
use olsr_core::scoring::{scores, threshold_from_validation, ScoringOptions};
use olsr_core::{Calibration, DetectorModel, FeatureSet};

use crate::config::{require_file, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::load_features;

/// Training and validation sets, either given or split from the training file.
pub struct Inputs {
    pub train: FeatureSet,
    pub val: FeatureSet,
    pub split_from_train: bool,
}

pub fn load_inputs(cfg: &RunConfig, train: &Path, val: Option<&Path>) -> CliResult<Inputs> {
    require_file(train, "training feature file")?;
    if let Some(v) = val {
        require_file(v, "validation feature file")?;
    }
    let full = load_features(train)?;
    match val {
        Some(v) => {
            let val = load_features(v)?;
            if val.dim() != full.dim() {
                return Err(CliError::Core(olsr_core::Error::Dimension(format!(
                    "validation features have H={}, training features have H={}",
                    val.dim(),
                    full.dim()
                ))));
            }
            Ok(Inputs {
                train: full,
                val,
                split_from_train: false,
            })
        }
        None => {
            let (train, val) = split(&full, cfg.train.val_fraction, cfg.train.seed)?;
            Ok(Inputs {
                train,
                val,
                split_from_train: true,
            })
        }
    }
}

pub fn load_encoder(path: &Path) -> CliResult<DenseMatrix> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Raw {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }
    require_file(path, "initial encoder")?;
    let raw: Raw = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(DenseMatrix::new(raw.rows, raw.cols, raw.data)?)
}

/// A trained and calibrated detector with its validation threshold.
pub struct Fitted {
    pub model: DetectorModel,
    pub log: TrainLog,
    pub calibration: Calibration,
    pub threshold: f64,
}

pub fn fit(cfg: &RunConfig, inputs: &Inputs, init: Option<DenseMatrix>) -> CliResult<Fitted> {
    let (model, log) = train_model(&inputs.train, &cfg.train, init)?;
    let calibration = fit_gaussians(
        &model,
        &inputs.val,
        cfg.train.epsilon_multipliers(),
        cfg.scoring.distance,
    )?;
    let val_scores = scores(&model, &calibration, &inputs.val, &cfg.scoring)?;
    let threshold = threshold_from_validation(&val_scores, cfg.target_tpr)?;
    Ok(Fitted {
        model,
        log,
        calibration,
        threshold,
    })
}

/// Scores of `set` under `opts`, after checking dimensions.
pub fn score_values(
    model: &DetectorModel,
    calibration: &Calibration,
    set: &FeatureSet,
    opts: &ScoringOptions,
) -> CliResult<Vec<f64>> {
    Ok(scores(model, calibration, set, opts)?)
}
