use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::data::rng::CounterRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// `y = act(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl FcLayer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(format!(
                "bias length {} does not match {} output rows",
                bias.len(),
                weight.rows()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("layer bias".into()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// Weights and biases drawn from `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn init(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut CounterRng,
    ) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weight = DenseMatrix::from_fn(outputs, inputs, |_, _| rng.uniform_range(-bound, bound));
        let bias = (0..outputs)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        Self {
            weight,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.weight.matvec(x);
        for (zi, bi) in z.iter_mut().zip(&self.bias) {
            *zi += bi;
        }
        z
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }
}

/// Inputs and pre-activations of every layer, as needed by [`backward`].
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// ReLU masks (`pre > 0`) for every ReLU layer, in order.
    pub fn relu_masks(&self, layers: &[FcLayer]) -> Vec<Vec<bool>> {
        layers
            .iter()
            .zip(&self.pre)
            .filter(|(l, _)| l.activation == Activation::Relu)
            .map(|(_, z)| z.iter().map(|&v| v > 0.0).collect())
            .collect()
    }
}

#[inline]
fn activate(act: Activation, z: &[f64]) -> Vec<f64> {
    match act {
        Activation::Relu => z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
        Activation::None => z.to_vec(),
    }
}

fn check_chain(layers: &[FcLayer], input_len: usize) -> Result<()> {
    let Some(first) = layers.first() else {
        return Err(Error::shape("empty layer list"));
    };
    if first.inputs() != input_len {
        return Err(Error::shape(format!(
            "input length {input_len} does not match first layer width {}",
            first.inputs()
        )));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].outputs() != pair[1].inputs() {
            return Err(Error::shape(format!(
                "layer {i} emits {} values but layer {} expects {}",
                pair[0].outputs(),
                i + 1,
                pair[1].inputs()
            )));
        }
    }
    Ok(())
}

pub fn forward(layers: &[FcLayer], x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    check_chain(layers, x.len())?;
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
    };
    let mut h = x.to_vec();
    for layer in layers {
        let z = layer.pre_activation(&h);
        let next = activate(layer.activation, &z);
        cache.inputs.push(h);
        cache.pre.push(z);
        h = next;
    }
    Ok((h, cache))
}

/// Forward pass without keeping the cache.
pub fn forward_value(layers: &[FcLayer], x: &[f64]) -> Result<Vec<f64>> {
    check_chain(layers, x.len())?;
    let mut h = x.to_vec();
    for layer in layers {
        h = activate(layer.activation, &layer.pre_activation(&h));
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &FcLayer) -> Self {
        Self {
            weight: DenseMatrix::zeros(layer.outputs(), layer.inputs()),
            bias: vec![0.0; layer.outputs()],
        }
    }
}

/// Accumulates `scale · ∂/∂θ` into `grads` for the upstream gradient
/// `grad_out` and returns the gradient with respect to the network input.
///
/// ReLU derivative at exactly zero is taken as 0.
pub fn backward(
    layers: &[FcLayer],
    cache: &ForwardCache,
    grad_out: &[f64],
    grads: &mut [LayerGrad],
    scale: f64,
) -> Vec<f64> {
    assert_eq!(layers.len(), grads.len());
    let mut g = grad_out.to_vec();
    for ((layer, grad), (input, pre)) in layers
        .iter()
        .zip(grads.iter_mut())
        .zip(cache.inputs.iter().zip(&cache.pre))
        .rev()
    {
        if layer.activation == Activation::Relu {
            for (gi, &zi) in g.iter_mut().zip(pre) {
                if zi <= 0.0 {
                    *gi = 0.0;
                }
            }
        }
        grad.weight.add_outer(scale, &g, input);
        for (b, gi) in grad.bias.iter_mut().zip(&g) {
            *b += scale * gi;
        }
        g = layer.weight.matvec_t(&g);
    }
    g
}
