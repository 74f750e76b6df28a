use std::path::PathBuf;

use olsr_core::affine::{
    decompose_path, input_path, norm_bias_table, recon_error_bound, NormBiasRow, OperatorNorm,
};
use olsr_core::detector::load_model;
use olsr_core::nn::{forward_value, l2_norm};
use serde::Serialize;

use crate::config::require_file;
use crate::error::{CliError, CliResult};
use crate::output::{emit, json_bytes, load_features};

pub struct Request {
    pub model: PathBuf,
    pub features: PathBuf,
    pub samples: usize,
    pub frobenius: bool,
    pub norms: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

/// Default norm grid, as multiples of the mean sample norm.
const NORM_MULTIPLES: [f64; 9] = [0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub operator_norm: OperatorNorm,
    /// Max over samples of `‖f(x) − (Γx + B)‖ / (1 + ‖f(x)‖)`.
    pub max_equality_residual: f64,
    pub bound_violations: usize,
    /// Max over samples of `actual / bound`.
    pub max_bound_ratio: f64,
    pub mean_sample_norm: f64,
    pub norm_bias: Vec<NormBiasRow>,
}

pub fn run(req: &Request) -> CliResult<()> {
    require_file(&req.model, "model file")?;
    let saved = load_model(&req.model)?;
    let set = load_features(&req.features)?;
    if set.dim() != saved.model.dim() {
        return Err(CliError::Core(olsr_core::Error::Dimension(format!(
            "features have H={}, model expects H={}",
            set.dim(),
            saved.model.dim()
        ))));
    }
    let n = req.samples.min(set.len());
    if n == 0 {
        return Err(CliError::config("no samples to verify"));
    }
    let norm = if req.frobenius {
        OperatorNorm::Frobenius
    } else {
        OperatorNorm::Spectral
    };
    let path = input_path(&saved.model);
    let layers = saved.model.input_reconstruction_path();
    let mut max_residual: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    let mut directions = Vec::with_capacity(n);
    let mut norm_sum = 0.0;
    for i in 0..n {
        let x = set.row_f64(i);
        let decomp = decompose_path(&path, &x)?;
        let fx = forward_value(&layers, &x)?;
        let affine = decomp.apply(&x);
        let diff: Vec<f64> = fx.iter().zip(&affine).map(|(a, b)| a - b).collect();
        max_residual = max_residual.max(l2_norm(&diff) / (1.0 + l2_norm(&fx)));
        let check = recon_error_bound(&decomp, &x, norm)?;
        if !check.holds() {
            violations += 1;
        }
        if check.bound > 0.0 {
            max_ratio = max_ratio.max(check.actual / check.bound);
        }
        norm_sum += l2_norm(&x);
        directions.push(x);
    }
    let mean_norm = norm_sum / n as f64;
    let norms = req
        .norms
        .clone()
        .unwrap_or_else(|| NORM_MULTIPLES.iter().map(|m| m * mean_norm).collect());
    let report = VerifyReport {
        samples: n,
        operator_norm: norm,
        max_equality_residual: max_residual,
        bound_violations: violations,
        max_bound_ratio: max_ratio,
        mean_sample_norm: mean_norm,
        norm_bias: norm_bias_table(&saved.model, &directions, &norms)?,
    };
    emit(req.out.as_deref(), &json_bytes(&report)?)
}
