use super::layer::{backward, forward, Activation, FcLayer, LayerGrad};
use super::loss::{loss_total, LossOptions, ModelGrads};
use super::matrix::l2_norm;
use super::softmax::{log_softmax, softmax_unchecked};
use super::NORM_GUARD;
use crate::detector::DetectorModel;
use crate::{Error, Result};

/// Pre-activations closer than this to zero count as sitting on a ReLU kink.
pub const KINK_EPS: f64 = 1e-6;

const STEP: f64 = 1e-5;

/// One compared coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateError {
    pub analytic: f64,
    pub numeric: f64,
    /// `|a − n| / (|a| + |n| + 1e-12)`.
    pub rel: f64,
    /// Round-off bound of the difference quotient, `ε·(|L(θ+h)| + |L(θ−h)|) / 2h`.
    pub roundoff: f64,
}

impl CoordinateError {
    /// Whether `|a − n|` is within what the central difference can resolve.
    pub fn within_roundoff(&self) -> bool {
        (self.analytic - self.numeric).abs() <= self.roundoff
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over checked coordinates of `|a − n| / (|a| + |n| + 1e-12)`.
    pub max_rel_error: f64,
    /// Same maximum, over coordinates whose mismatch exceeds the round-off
    /// bound; below it the central difference cannot resolve the mismatch.
    pub max_resolved_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±h probe moves a unit sitting on (or across) a ReLU kink.
    pub skipped: usize,
    pub coordinates: Vec<CoordinateError>,
}

/// A scalar objective over a set of parameter tensors.
pub trait Objective: Clone {
    /// Loss value plus the pre-activations of every ReLU unit.
    fn evaluate(&self) -> Result<(f64, Vec<f64>)>;
    fn analytic_gradient(&self) -> Result<Vec<Vec<f64>>>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
}

/// The detector training loss for one `(v, y)` pair.
#[derive(Debug, Clone)]
pub struct DetectorObjective<'a> {
    pub model: DetectorModel,
    pub sample: &'a [f64],
    pub label: usize,
    pub options: LossOptions,
}

/// `½‖f(x) − target‖²` for a plain layer stack.
#[derive(Debug, Clone)]
pub struct RegressionObjective {
    pub layers: Vec<FcLayer>,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

fn relu_preacts(layers: &[FcLayer], pre: &[Vec<f64>], out: &mut Vec<f64>) {
    for (l, z) in layers.iter().zip(pre) {
        if l.activation == Activation::Relu {
            out.extend_from_slice(z);
        }
    }
}

fn penalty(opts: &LossOptions, target: &[f64], rebuilt: &[f64]) -> f64 {
    let r: Vec<f64> = target.iter().zip(rebuilt).map(|(a, b)| a - b).collect();
    match opts.recon {
        super::ReconLoss::Norm => l2_norm(&r),
        super::ReconLoss::Squared => r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64,
    }
}

/// Total loss `L1 + L2 + λ·L_reg`, evaluated without the gradient path.
pub fn loss_value(
    model: &DetectorModel,
    v: &[f64],
    label: usize,
    opts: &LossOptions,
) -> Result<f64> {
    Ok(detector_eval(model, v, label, opts)?.0)
}

fn detector_eval(
    model: &DetectorModel,
    v: &[f64],
    label: usize,
    opts: &LossOptions,
) -> Result<(f64, Vec<f64>)> {
    if label >= model.classes() {
        return Err(Error::param(format!(
            "label {label} outside [0, {})",
            model.classes()
        )));
    }
    let z = model.logits(v);
    let (v_hat, c1) = forward(&model.decoder1, &z)?;
    let s: Vec<f64> = z.iter().map(|x| x / model.temperature).collect();
    let p = softmax_unchecked(&z, model.temperature);
    let (s_hat, c2) = forward(&model.decoder2, &p)?;
    let reg = -log_softmax(&z)[label];
    let total = penalty(opts, v, &v_hat) + penalty(opts, &s, &s_hat) + opts.lambda * reg;
    let mut pre = Vec::new();
    relu_preacts(&model.decoder1, &c1.pre, &mut pre);
    relu_preacts(&model.decoder2, &c2.pre, &mut pre);
    Ok((total, pre))
}

impl Objective for DetectorObjective<'_> {
    fn evaluate(&self) -> Result<(f64, Vec<f64>)> {
        detector_eval(&self.model, self.sample, self.label, &self.options)
    }

    fn analytic_gradient(&self) -> Result<Vec<Vec<f64>>> {
        let (_, g): (_, ModelGrads) =
            loss_total(&self.model, self.sample, self.label, &self.options)?;
        Ok(g.as_slices().into_iter().map(<[f64]>::to_vec).collect())
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.model.params_mut()
    }
}

impl Objective for RegressionObjective {
    fn evaluate(&self) -> Result<(f64, Vec<f64>)> {
        let (y, cache) = forward(&self.layers, &self.input)?;
        let loss = 0.5
            * y.iter()
                .zip(&self.target)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        let mut pre = Vec::new();
        relu_preacts(&self.layers, &cache.pre, &mut pre);
        Ok((loss, pre))
    }

    fn analytic_gradient(&self) -> Result<Vec<Vec<f64>>> {
        let (y, cache) = forward(&self.layers, &self.input)?;
        let g_out: Vec<f64> = y.iter().zip(&self.target).map(|(a, b)| a - b).collect();
        let mut grads: Vec<LayerGrad> = self.layers.iter().map(LayerGrad::zeros_like).collect();
        backward(&self.layers, &cache, &g_out, &mut grads, 1.0);
        Ok(grads
            .into_iter()
            .flat_map(|g| [g.weight.as_slice().to_vec(), g.bias])
            .collect())
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

fn near_kink(base: &[f64], probe: &[f64]) -> bool {
    base.iter()
        .zip(probe)
        .any(|(&b, &p)| p != b && (b.abs() < KINK_EPS || (b > 0.0) != (p > 0.0)))
}

/// Compares analytic gradients against central differences with `h = 1e-5`.
pub fn grad_check<O: Objective>(objective: &O) -> Result<GradCheckReport> {
    let analytic = objective.analytic_gradient()?;
    let (_, base_pre) = objective.evaluate()?;
    let mut probe = objective.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_resolved_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        coordinates: Vec::new(),
    };
    for (t, tensor) in analytic.iter().enumerate() {
        for (j, &a) in tensor.iter().enumerate() {
            let original = probe.params_mut()[t][j];
            probe.params_mut()[t][j] = original + STEP;
            let (plus, pre_plus) = probe.evaluate()?;
            probe.params_mut()[t][j] = original - STEP;
            let (minus, pre_minus) = probe.evaluate()?;
            probe.params_mut()[t][j] = original;

            if near_kink(&base_pre, &pre_plus) || near_kink(&base_pre, &pre_minus) {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * STEP);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs() + NORM_GUARD);
            report.max_rel_error = report.max_rel_error.max(rel);
            let coord = CoordinateError {
                analytic: a,
                numeric,
                rel,
                roundoff: f64::EPSILON * (plus.abs() + minus.abs()) / (2.0 * STEP),
            };
            if !coord.within_roundoff() {
                report.max_resolved_rel_error = report.max_resolved_rel_error.max(rel);
            }
            report.coordinates.push(coord);
            report.checked += 1;
        }
    }
    Ok(report)
}
