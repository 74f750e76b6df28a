use std::path::PathBuf;

use olsr_core::metrics::auroc;
use olsr_core::scoring::{Framework, ScoringOptions};
use serde::Serialize;

use super::{fit, load_inputs, score_values};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{emit, json_bytes, load_features};

pub struct Request {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub id_test: PathBuf,
    pub ood: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameworkAuroc {
    /// AUROC against each OoD file, in argument order.
    pub per_ood: Vec<f64>,
    /// AUROC against all OoD files pooled.
    pub pooled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub regularizer_disabled: bool,
    pub layerwise: FrameworkAuroc,
    pub basic: FrameworkAuroc,
}

#[derive(Debug, Clone, Serialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub range: f64,
}

impl Spread {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Self {
            min,
            max,
            range: max - min,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepReport<'a> {
    pub config: &'a RunConfig,
    pub ood_files: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Pooled AUROC spread across λ.
    pub layerwise_pooled: Spread,
    pub basic_pooled: Spread,
    /// Recorded, not enforced: layerwise's worst λ is no worse than basic's.
    pub layerwise_min_at_least_basic_min: bool,
    pub layerwise_range_at_most_basic_range: bool,
}

pub fn sweep(cfg: &RunConfig, req: &Request) -> CliResult<Vec<SweepRow>> {
    if cfg.lambdas.is_empty() {
        return Err(CliError::config("empty λ list"));
    }
    let inputs = load_inputs(cfg, &req.train, req.val.as_deref())?;
    let id_test = load_features(&req.id_test)?;
    let oods = req
        .ood
        .iter()
        .map(|p| load_features(p))
        .collect::<CliResult<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(cfg.lambdas.len());
    for &lambda in &cfg.lambdas {
        let mut run_cfg = cfg.clone();
        run_cfg.train.lambda = lambda;
        run_cfg.scoring.framework = Framework::Layerwise;
        let fitted = fit(&run_cfg, &inputs, None)?;
        let per_framework = |framework: Framework| -> CliResult<FrameworkAuroc> {
            let opts = ScoringOptions {
                framework,
                ..run_cfg.scoring
            };
            let id = score_values(&fitted.model, &fitted.calibration, &id_test, &opts)?;
            let mut pooled = Vec::new();
            let mut per_ood = Vec::with_capacity(oods.len());
            for set in &oods {
                let s = score_values(&fitted.model, &fitted.calibration, set, &opts)?;
                per_ood.push(auroc(&id, &s)?);
                pooled.extend(s);
            }
            Ok(FrameworkAuroc {
                per_ood,
                pooled: auroc(&id, &pooled)?,
            })
        };
        let row = SweepRow {
            lambda,
            regularizer_disabled: fitted.log.regularizer_disabled,
            layerwise: per_framework(Framework::Layerwise)?,
            basic: per_framework(Framework::Basic)?,
        };
        log::info!(
            "λ={lambda}: layerwise {:.4}, basic {:.4} (pooled AUROC)",
            row.layerwise.pooled,
            row.basic.pooled
        );
        rows.push(row);
    }
    Ok(rows)
}

pub fn run(cfg: &RunConfig, req: &Request) -> CliResult<()> {
    let rows = sweep(cfg, req)?;
    let layerwise_pooled = Spread::of(rows.iter().map(|r| r.layerwise.pooled));
    let basic_pooled = Spread::of(rows.iter().map(|r| r.basic.pooled));
    let report = SweepReport {
        config: cfg,
        ood_files: req.ood.iter().map(|p| p.display().to_string()).collect(),
        layerwise_min_at_least_basic_min: layerwise_pooled.min >= basic_pooled.min,
        layerwise_range_at_most_basic_range: layerwise_pooled.range <= basic_pooled.range,
        layerwise_pooled,
        basic_pooled,
        rows,
    };
    emit(req.out.as_deref(), &json_bytes(&report)?)?;
    if req.out.is_some() {
        println!("{:>10}  {:>9}  {:>9}", "lambda", "layerwise", "basic");
        for r in &report.rows {
            println!(
                "{:>10}  {:>9.1}  {:>9.1}",
                r.lambda,
                100.0 * r.layerwise.pooled,
                100.0 * r.basic.pooled
            );
        }
    }
    Ok(())
}
