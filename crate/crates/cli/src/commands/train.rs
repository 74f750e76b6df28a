use std::path::PathBuf;

use olsr_core::detector::{encode_model, EpochLog, SavedDetector};
use olsr_core::scoring::{score_set, ScoringOptions};
use olsr_core::Calibration;
use serde::Serialize;

use super::{fit, load_encoder, load_inputs};
use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{json_bytes, write_atomic};

pub struct Paths {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub init_encoder: Option<PathBuf>,
    pub model: PathBuf,
    pub log: PathBuf,
}

/// Factor values below this on ID validation data count as "low".
const FACTOR_FLOOR: f64 = 0.1;

#[derive(Debug, Serialize)]
pub struct FactorFloor {
    pub floor: f64,
    pub phi0: f64,
    pub psi1: f64,
    pub psi2: f64,
}

#[derive(Debug, Serialize)]
pub struct TrainReport<'a> {
    pub config: &'a RunConfig,
    pub train_file: String,
    pub val_file: Option<String>,
    pub val_split_from_train: bool,
    pub n_train: usize,
    pub n_val: usize,
    pub dim: usize,
    pub classes: usize,
    pub hidden_width: usize,
    pub updates: usize,
    /// Set when λ = 0: the cross-entropy term is logged but not optimized.
    pub regularizer_disabled: bool,
    pub epochs: &'a [EpochLog],
    pub calibration: Calibration,
    pub scoring: ScoringOptions,
    pub target_tpr: f64,
    pub threshold: f64,
    /// Fraction of ID validation samples whose factor falls below the floor.
    pub val_factor_floor: FactorFloor,
    pub flagged_val_samples: usize,
}

pub fn run(cfg: &RunConfig, paths: &Paths) -> CliResult<()> {
    cfg.train.validate()?;
    let init = paths
        .init_encoder
        .as_deref()
        .map(load_encoder)
        .transpose()?;
    let inputs = load_inputs(cfg, &paths.train, paths.val.as_deref())?;
    let fitted = fit(cfg, &inputs, init)?;
    if fitted.log.regularizer_disabled {
        log::warn!("λ = 0: regularizer disabled");
    }

    let rows = score_set(
        &fitted.model,
        &fitted.calibration,
        &inputs.val,
        &cfg.scoring,
        fitted.threshold,
    )?;
    let n = rows.len().max(1) as f64;
    let below = |f: fn(&olsr_core::scoring::ScoreRow) -> f64| {
        rows.iter().filter(|r| f(r) < FACTOR_FLOOR).count() as f64 / n
    };
    let report = TrainReport {
        config: cfg,
        train_file: paths.train.display().to_string(),
        val_file: paths.val.as_ref().map(|p| p.display().to_string()),
        val_split_from_train: inputs.split_from_train,
        n_train: inputs.train.len(),
        n_val: inputs.val.len(),
        dim: fitted.model.dim(),
        classes: fitted.model.classes(),
        hidden_width: fitted.model.hidden_widths().0[0],
        updates: fitted.log.updates,
        regularizer_disabled: fitted.log.regularizer_disabled,
        epochs: &fitted.log.epochs,
        calibration: fitted.calibration,
        scoring: cfg.scoring,
        target_tpr: cfg.target_tpr,
        threshold: fitted.threshold,
        val_factor_floor: FactorFloor {
            floor: FACTOR_FLOOR,
            phi0: below(|r| r.phi0),
            psi1: below(|r| r.psi1),
            psi2: below(|r| r.psi2),
        },
        flagged_val_samples: rows.iter().filter(|r| r.flagged).count(),
    };

    let saved = SavedDetector {
        model: fitted.model,
        calibration: fitted.calibration,
        epsilon_multiplier: cfg.train.epsilon_multiplier,
    };
    write_atomic(&paths.model, &encode_model(&saved))?;
    write_atomic(&paths.log, &json_bytes(&report)?)?;
    if let Some(last) = report.epochs.last() {
        log::info!(
            "trained {} updates; final epoch L1={:.4} L2={:.4} Lreg={:.4}",
            report.updates,
            last.l1,
            last.l2,
            last.reg
        );
    }
    Ok(())
}
