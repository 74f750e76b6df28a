use std::path::Path;

use olsr_core::metrics::{histogram, PercentReport};
use olsr_core::EvalReport;
use serde::Serialize;

use crate::error::CliResult;
use crate::output::{emit, json_bytes, read_scores};

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Serialize)]
pub struct Histograms {
    pub bins: usize,
    pub range: [f64; 2],
    pub id: Vec<usize>,
    pub ood: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    pub id_file: String,
    pub ood_file: String,
    pub metrics: EvalReport,
    pub percent: PercentReport,
    pub display: String,
    pub histograms: Histograms,
}

pub fn evaluate(id_path: &Path, ood_path: &Path) -> CliResult<EvalOutput> {
    let id = read_scores(id_path)?;
    let ood = read_scores(ood_path)?;
    let metrics = EvalReport::evaluate(&id, &ood)?;
    Ok(EvalOutput {
        id_file: id_path.display().to_string(),
        ood_file: ood_path.display().to_string(),
        percent: metrics.percentages(),
        display: metrics.display_row(),
        metrics,
        histograms: Histograms {
            bins: HISTOGRAM_BINS,
            range: [0.0, 1.0],
            id: histogram(&id, HISTOGRAM_BINS),
            ood: histogram(&ood, HISTOGRAM_BINS),
        },
    })
}

/// With `--out` the JSON report goes to the file and the display row to
/// stdout; otherwise the JSON goes to stdout.
pub fn run(id_path: &Path, ood_path: &Path, out: Option<&Path>) -> CliResult<()> {
    let report = evaluate(id_path, ood_path)?;
    emit(out, &json_bytes(&report)?)?;
    if out.is_some() {
        println!("{}", report.display);
    }
    Ok(())
}
