use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use olsr_core::detector::{fit_gaussians, load_model};
use olsr_core::scoring::{
    score_set, scores, threshold_from_validation, Decision, ScoreRow, ScoringOptions,
};

use crate::config::{require_file, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{emit, json_bytes, load_features, sibling};

pub struct Request {
    pub model: PathBuf,
    pub features: PathBuf,
    pub out: Option<PathBuf>,
    pub json: bool,
    pub threshold: Option<f64>,
    pub train_log: Option<PathBuf>,
    pub recalibrate: Option<PathBuf>,
}

pub const CSV_HEADER: &str = "index,conf,r1,r2,phi0,psi1,psi2,score,decision,flagged";

#[derive(serde::Deserialize)]
struct LogView {
    threshold: f64,
    scoring: ScoringOptions,
}

fn read_log(path: &Path) -> CliResult<LogView> {
    require_file(path, "training log")?;
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn run(cfg: &RunConfig, req: &Request) -> CliResult<()> {
    require_file(&req.model, "model file")?;
    require_file(&req.features, "feature file")?;
    let saved = load_model(&req.model)?;
    let set = load_features(&req.features)?;
    let opts = cfg.scoring;

    let (calibration, threshold) = match &req.recalibrate {
        Some(val_path) => {
            let val = load_features(val_path)?;
            let k = saved.epsilon_multiplier;
            let cal = fit_gaussians(&saved.model, &val, [k; 3], opts.distance)?;
            let threshold = match req.threshold {
                Some(t) => t,
                None => threshold_from_validation(
                    &scores(&saved.model, &cal, &val, &opts)?,
                    cfg.target_tpr,
                )?,
            };
            (cal, threshold)
        }
        None => {
            let log_path = req
                .train_log
                .clone()
                .unwrap_or_else(|| sibling(&req.model, "json"));
            let logged = if req.threshold.is_none() || log_path.is_file() {
                Some(read_log(&log_path)?)
            } else {
                None
            };
            if let Some(l) = &logged {
                if l.scoring.distance != opts.distance {
                    return Err(CliError::config(format!(
                        "model was calibrated with {:?} residuals; pass --recalibrate VAL to score with {:?}",
                        l.scoring.distance, opts.distance
                    )));
                }
            }
            let threshold = match (req.threshold, &logged) {
                (Some(t), _) => t,
                (None, Some(l)) => l.threshold,
                (None, None) => unreachable!("log is read whenever no threshold is given"),
            };
            (saved.calibration, threshold)
        }
    };

    let rows = score_set(&saved.model, &calibration, &set, &opts, threshold)?;
    let bytes = if req.json {
        json_bytes(&rows)?
    } else {
        rows_to_csv(&rows).into_bytes()
    };
    emit(req.out.as_deref(), &bytes)
}

pub fn rows_to_csv(rows: &[ScoreRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let decision = match r.decision {
            Decision::Id => "id",
            Decision::Ood => "ood",
        };
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index, r.conf, r.r1, r.r2, r.phi0, r.psi1, r.psi2, r.score, decision, r.flagged
        )
        .expect("writing to a String cannot fail");
    }
    s
}
