use serde::{Deserialize, Serialize};

use super::layer::{backward, forward, LayerGrad};
use super::matrix::{l2_norm, DenseMatrix};
use super::softmax::{log_softmax, softmax_unchecked};
use super::NORM_GUARD;
use crate::detector::DetectorModel;
use crate::{Error, Result};

/// Per-sample reconstruction penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconLoss {
    /// Unsquared L2 norm of the residual.
    #[default]
    Norm,
    /// Mean squared error.
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    pub lambda: f64,
    pub recon: ReconLoss,
    /// Treat the `Wv/T` target of the latent reconstruction term as a constant.
    pub detach_l2_target: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            recon: ReconLoss::Norm,
            detach_l2_target: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub l1: f64,
    pub l2: f64,
    pub reg: f64,
}

impl LossTerms {
    pub fn total(&self, lambda: f64) -> f64 {
        self.l1 + self.l2 + lambda * self.reg
    }

    pub fn is_finite(&self) -> bool {
        self.l1.is_finite() && self.l2.is_finite() && self.reg.is_finite()
    }
}

/// Gradient buffers shaped like a [`DetectorModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: DenseMatrix,
    pub decoder1: Vec<LayerGrad>,
    pub decoder2: Vec<LayerGrad>,
}

impl ModelGrads {
    pub fn zeros_like(model: &DetectorModel) -> Self {
        Self {
            encoder: DenseMatrix::zeros(model.classes(), model.dim()),
            decoder1: model.decoder1.iter().map(LayerGrad::zeros_like).collect(),
            decoder2: model.decoder2.iter().map(LayerGrad::zeros_like).collect(),
        }
    }

    pub fn clear(&mut self) {
        self.encoder.as_mut_slice().fill(0.0);
        for g in self.decoder1.iter_mut().chain(self.decoder2.iter_mut()) {
            g.weight.as_mut_slice().fill(0.0);
            g.bias.fill(0.0);
        }
    }

    /// Same order as [`DetectorModel::params_mut`].
    pub fn as_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.encoder.as_slice()];
        for g in self.decoder1.iter().chain(self.decoder2.iter()) {
            out.push(g.weight.as_slice());
            out.push(&g.bias);
        }
        out
    }
}

/// Value of the reconstruction penalty for `target - rebuilt` and its
/// derivative with respect to `rebuilt`.
fn recon_penalty(kind: ReconLoss, target: &[f64], rebuilt: &[f64]) -> (f64, Vec<f64>) {
    let residual: Vec<f64> = target.iter().zip(rebuilt).map(|(a, b)| a - b).collect();
    match kind {
        ReconLoss::Norm => {
            let norm = l2_norm(&residual);
            let grad = if norm < NORM_GUARD {
                vec![0.0; residual.len()]
            } else {
                residual.iter().map(|r| -r / norm).collect()
            };
            (norm, grad)
        }
        ReconLoss::Squared => {
            let n = residual.len() as f64;
            let value = residual.iter().map(|r| r * r).sum::<f64>() / n;
            (value, residual.iter().map(|r| -2.0 * r / n).collect())
        }
    }
}

/// Adds `scale · ∇(L1 + L2 + λ·L_reg)` for one sample into `grads`.
///
/// * `L1 = pen(v − D1(Wv))`
/// * `L2 = pen(Wv/T − D2(S(Wv/T)))`
/// * `L_reg = −log S(Wv)_y` (temperature 1)
///
/// `W` receives gradient from all three terms, each decoder only from its own
/// reconstruction term.
pub fn loss_accumulate(
    model: &DetectorModel,
    v: &[f64],
    label: usize,
    opts: &LossOptions,
    grads: &mut ModelGrads,
    scale: f64,
) -> Result<LossTerms> {
    if v.len() != model.dim() {
        return Err(Error::shape(format!(
            "feature has {} entries, model expects {}",
            v.len(),
            model.dim()
        )));
    }
    if label >= model.classes() {
        return Err(Error::param(format!(
            "label {label} outside [0, {})",
            model.classes()
        )));
    }
    let t = model.temperature;
    let z = model.logits(v);

    let (v_hat, cache1) = forward(&model.decoder1, &z)?;
    let (l1, g_vhat) = recon_penalty(opts.recon, v, &v_hat);
    let mut dz = backward(
        &model.decoder1,
        &cache1,
        &g_vhat,
        &mut grads.decoder1,
        scale,
    );

    let s: Vec<f64> = z.iter().map(|zi| zi / t).collect();
    let p = softmax_unchecked(&z, t);
    let (s_hat, cache2) = forward(&model.decoder2, &p)?;
    let (l2, g_shat) = recon_penalty(opts.recon, &s, &s_hat);
    let dp = backward(
        &model.decoder2,
        &cache2,
        &g_shat,
        &mut grads.decoder2,
        scale,
    );
    let p_dot_dp: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
    for (k, dzk) in dz.iter_mut().enumerate() {
        let mut ds = p[k] * (dp[k] - p_dot_dp);
        if !opts.detach_l2_target {
            ds -= g_shat[k];
        }
        *dzk += ds / t;
    }

    let log_p = log_softmax(&z);
    let reg = -log_p[label];
    if opts.lambda != 0.0 {
        for (k, dzk) in dz.iter_mut().enumerate() {
            let onehot = if k == label { 1.0 } else { 0.0 };
            *dzk += opts.lambda * (log_p[k].exp() - onehot);
        }
    }
    grads.encoder.add_outer(scale, &dz, v);

    Ok(LossTerms { l1, l2, reg })
}

/// Loss terms and full gradient for a single sample.
pub fn loss_total(
    model: &DetectorModel,
    v: &[f64],
    label: usize,
    opts: &LossOptions,
) -> Result<(LossTerms, ModelGrads)> {
    let mut grads = ModelGrads::zeros_like(model);
    let terms = loss_accumulate(model, v, label, opts, &mut grads, 1.0)?;
    Ok((terms, grads))
}
