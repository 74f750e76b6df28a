//! Local affine analysis of ReLU networks.
//!
//! Inside one activation region a ReLU network is `f(x) = Γx + B`, with Γ and
//! B composed from the weights and the 0/1 activation masks at `x`. For a
//! square map this yields `‖x − f(x)‖ ≤ ‖I − Γ‖·‖x‖ + ‖B‖`: the raw
//! reconstruction error of an autoencoder grows roughly with the input norm,
//! which is why residuals are normalized before scoring.

use serde::{Deserialize, Serialize};

use crate::data::rng::{stream, CounterRng};
use crate::detector::DetectorModel;
use crate::nn::{forward, forward_value, l2_norm, Activation, DenseMatrix, FcLayer, NORM_GUARD};
use crate::scoring::{l2_distance, nl2};
use crate::{Error, Result};

/// Slack allowed on the bound inequality.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineDecomp {
    pub gamma: DenseMatrix,
    pub offset: Vec<f64>,
    /// Per ReLU layer, whether each unit is active (`pre-activation > 0`).
    pub pattern: Vec<Vec<bool>>,
}

impl AffineDecomp {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.gamma.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.offset) {
            *yi += bi;
        }
        y
    }
}

/// A stage of an analyzed path. Only dense stages are piecewise affine.
#[derive(Debug, Clone, PartialEq)]
pub enum PathStage {
    Dense(FcLayer),
    Softmax { temperature: f64 },
}

fn mask_rows(gamma: &mut DenseMatrix, offset: &mut [f64], pre: &[f64]) -> Vec<bool> {
    let mask: Vec<bool> = pre.iter().map(|&z| z > 0.0).collect();
    for (r, &on) in mask.iter().enumerate() {
        if !on {
            offset[r] = 0.0;
            for c in 0..gamma.cols() {
                gamma.set(r, c, 0.0);
            }
        }
    }
    mask
}

/// `Γ` and `B` of the activation region containing `x`. Units sitting exactly
/// on the kink count as inactive.
pub fn decompose(layers: &[FcLayer], x: &[f64]) -> Result<AffineDecomp> {
    let (_, cache) = forward(layers, x)?;
    let first = &layers[0];
    let mut gamma = first.weight.clone();
    let mut offset = first.bias.clone();
    let mut pattern = Vec::new();
    if first.activation == Activation::Relu {
        pattern.push(mask_rows(&mut gamma, &mut offset, &cache.pre[0]));
    }
    for (layer, pre) in layers.iter().zip(&cache.pre).skip(1) {
        gamma = layer.weight.matmul(&gamma)?;
        offset = layer.weight.matvec(&offset);
        for (o, b) in offset.iter_mut().zip(&layer.bias) {
            *o += b;
        }
        if layer.activation == Activation::Relu {
            pattern.push(mask_rows(&mut gamma, &mut offset, pre));
        }
    }
    Ok(AffineDecomp {
        gamma,
        offset,
        pattern,
    })
}

/// [`decompose`] over a staged path; a softmax anywhere on it is rejected.
pub fn decompose_path(stages: &[PathStage], x: &[f64]) -> Result<AffineDecomp> {
    let layers = stages
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            PathStage::Dense(l) => Ok(l.clone()),
            PathStage::Softmax { .. } => Err(Error::UnsupportedPath(format!(
                "stage {i} is a softmax; only FC/ReLU paths are piecewise affine"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    decompose(&layers, x)
}

/// `v ↦ D1(Wv)`: the detector's input reconstruction path.
pub fn input_path(model: &DetectorModel) -> Vec<PathStage> {
    model
        .input_reconstruction_path()
        .into_iter()
        .map(PathStage::Dense)
        .collect()
}

/// `v ↦ D2(S(Wv/T))`: contains a softmax, so it cannot be decomposed.
pub fn latent_path(model: &DetectorModel) -> Vec<PathStage> {
    let mut stages = vec![PathStage::Dense(FcLayer {
        weight: model.encoder.clone(),
        bias: vec![0.0; model.classes()],
        activation: Activation::None,
    })];
    stages.push(PathStage::Softmax {
        temperature: model.temperature,
    });
    stages.extend(model.decoder2.iter().cloned().map(PathStage::Dense));
    stages
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorNorm {
    #[default]
    Spectral,
    /// Frobenius norm; never smaller than the spectral norm.
    Frobenius,
}

/// Largest singular value by power iteration on `MᵀM` from a seeded start.
pub fn spectral_norm(m: &DenseMatrix, max_iter: usize, tol: f64) -> f64 {
    let mut rng = CounterRng::new(0, stream::POWER_ITERATION);
    let mut v: Vec<f64> = (0..m.cols()).map(|_| rng.normal()).collect();
    let n0 = l2_norm(&v);
    if n0 == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut sigma = l2_norm(&m.matvec(&v));
    for _ in 0..max_iter {
        let w = m.matvec_t(&m.matvec(&v));
        let wn = l2_norm(&w);
        if wn == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / wn).collect();
        let next = l2_norm(&m.matvec(&v));
        let done = (next - sigma).abs() <= tol * next.max(f64::MIN_POSITIVE);
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `‖I − Γ‖·‖x‖ + ‖B‖`.
    pub bound: f64,
    /// `‖x − (Γx + B)‖`.
    pub actual: f64,
    pub operator_norm: f64,
    pub offset_norm: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.actual <= self.bound + BOUND_SLACK
    }
}

pub fn recon_error_bound(
    decomp: &AffineDecomp,
    x: &[f64],
    norm: OperatorNorm,
) -> Result<BoundCheck> {
    let (rows, cols) = decomp.gamma.shape();
    if rows != cols {
        return Err(Error::shape(format!(
            "reconstruction bound needs a square map, Γ is {rows}x{cols}"
        )));
    }
    if x.len() != cols {
        return Err(Error::shape(format!(
            "input has {} entries, Γ has {cols} columns",
            x.len()
        )));
    }
    let mut residual_map = DenseMatrix::identity(rows);
    for r in 0..rows {
        for c in 0..cols {
            residual_map.set(r, c, residual_map.get(r, c) - decomp.gamma.get(r, c));
        }
    }
    let operator_norm = match norm {
        OperatorNorm::Spectral => spectral_norm(&residual_map, 30, 1e-9),
        OperatorNorm::Frobenius => residual_map.frobenius_norm(),
    };
    let offset_norm = l2_norm(&decomp.offset);
    let actual = l2_distance(x, &decomp.apply(x));
    Ok(BoundCheck {
        bound: operator_norm * l2_norm(x) + offset_norm,
        actual,
        operator_norm,
        offset_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBiasRow {
    pub norm: f64,
    pub mean_l2: f64,
    /// `None` at zero norm, where NL2 is undefined.
    pub mean_nl2: Option<f64>,
}

/// Scales each direction (normalized to unit length) to every norm on the grid
/// and averages raw L2 and NL2 errors of `v ↦ D1(Wv)`.
pub fn norm_bias_table(
    model: &DetectorModel,
    directions: &[Vec<f64>],
    norms: &[f64],
) -> Result<Vec<NormBiasRow>> {
    let units: Vec<Vec<f64>> = directions
        .iter()
        .filter_map(|d| {
            let n = l2_norm(d);
            (n > NORM_GUARD).then(|| d.iter().map(|x| x / n).collect())
        })
        .collect();
    if units.is_empty() {
        return Err(Error::Degenerate("no nonzero directions".into()));
    }
    let path = model.input_reconstruction_path();
    norms
        .iter()
        .map(|&norm| {
            let mut sum_l2 = 0.0;
            let mut sum_nl2 = 0.0;
            for u in &units {
                let x: Vec<f64> = u.iter().map(|v| v * norm).collect();
                let recon = forward_value(&path, &x)?;
                sum_l2 += l2_distance(&x, &recon);
                if norm > NORM_GUARD {
                    sum_nl2 += nl2(&x, &recon)?;
                }
            }
            let k = units.len() as f64;
            Ok(NormBiasRow {
                norm,
                mean_l2: sum_l2 / k,
                mean_nl2: (norm > NORM_GUARD).then_some(sum_nl2 / k),
            })
        })
        .collect()
}
