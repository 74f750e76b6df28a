use crate::data::rng::{stream, CounterRng};
use crate::nn::{forward_value, softmax_t, Activation, DenseMatrix, FcLayer};
use crate::{Error, Result};

/// Encoder `W` (C×H, no bias) with the two reconstruction decoders.
///
/// * `decoder1`: logits `Wv` → feature `v` (C → hidden → hidden → H)
/// * `decoder2`: probabilities `S(Wv/T)` → scaled logits `Wv/T` (C → hidden → hidden → C)
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub encoder: DenseMatrix,
    pub decoder1: Vec<FcLayer>,
    pub decoder2: Vec<FcLayer>,
    pub temperature: f64,
}

/// Default hidden width of both decoders.
pub fn default_hidden_width(dim: usize, classes: usize) -> usize {
    dim.max(4 * classes)
}

fn decoder(
    inputs: usize,
    hidden: [usize; 2],
    outputs: usize,
    rng: &mut CounterRng,
) -> Vec<FcLayer> {
    vec![
        FcLayer::init(inputs, hidden[0], Activation::Relu, rng),
        FcLayer::init(hidden[0], hidden[1], Activation::Relu, rng),
        FcLayer::init(hidden[1], outputs, Activation::None, rng),
    ]
}

impl DetectorModel {
    pub fn new(
        encoder: DenseMatrix,
        decoder1: Vec<FcLayer>,
        decoder2: Vec<FcLayer>,
        temperature: f64,
    ) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::param(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let (c, h) = encoder.shape();
        if c == 0 || h == 0 {
            return Err(Error::shape("encoder must be non-empty"));
        }
        check_decoder("decoder1", &decoder1, c, h)?;
        check_decoder("decoder2", &decoder2, c, c)?;
        Ok(Self {
            encoder,
            decoder1,
            decoder2,
            temperature,
        })
    }

    /// Seeded uniform fan-in initialization. `encoder` replaces the random
    /// encoder when given (e.g. the upstream classifier's last FC layer).
    pub fn init(
        dim: usize,
        classes: usize,
        hidden: usize,
        temperature: f64,
        seed: u64,
        encoder: Option<DenseMatrix>,
    ) -> Result<Self> {
        let mut rng = CounterRng::new(seed, stream::INIT);
        let random = FcLayer::init(dim, classes, Activation::None, &mut rng).weight;
        let encoder = match encoder {
            Some(w) if w.shape() != (classes, dim) => {
                return Err(Error::Dimension(format!(
                    "initial encoder is {}x{}, expected {classes}x{dim}",
                    w.rows(),
                    w.cols()
                )))
            }
            Some(w) => w,
            None => random,
        };
        let decoder1 = decoder(classes, [hidden, hidden], dim, &mut rng);
        let decoder2 = decoder(classes, [hidden, hidden], classes, &mut rng);
        Self::new(encoder, decoder1, decoder2, temperature)
    }

    /// Feature dimension H.
    pub fn dim(&self) -> usize {
        self.encoder.cols()
    }

    /// Class count C.
    pub fn classes(&self) -> usize {
        self.encoder.rows()
    }

    pub fn logits(&self, v: &[f64]) -> Vec<f64> {
        self.encoder.matvec(v)
    }

    /// `D1(Wv)`.
    pub fn reconstruct_feature(&self, v: &[f64]) -> Result<Vec<f64>> {
        forward_value(&self.decoder1, &self.logits(v))
    }

    /// `(Wv/T, S(Wv/T), D2(S(Wv/T)))`.
    pub fn latent_round_trip(&self, logits: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let scaled: Vec<f64> = logits.iter().map(|z| z / self.temperature).collect();
        let probs = softmax_t(logits, self.temperature)?;
        let rebuilt = forward_value(&self.decoder2, &probs)?;
        Ok((scaled, probs, rebuilt))
    }

    /// The ReLU network `v ↦ D1(Wv)` as a plain layer list (encoder with zero bias).
    pub fn input_reconstruction_path(&self) -> Vec<FcLayer> {
        let mut path = Vec::with_capacity(1 + self.decoder1.len());
        path.push(FcLayer {
            weight: self.encoder.clone(),
            bias: vec![0.0; self.classes()],
            activation: Activation::None,
        });
        path.extend(self.decoder1.iter().cloned());
        path
    }

    pub fn hidden_widths(&self) -> ([usize; 2], [usize; 2]) {
        let w = |d: &[FcLayer]| [d[0].outputs(), d[1].outputs()];
        (w(&self.decoder1), w(&self.decoder2))
    }

    /// Parameter tensors in serialization order: W, then (weight, bias) of every
    /// decoder1 layer, then of every decoder2 layer.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.encoder.as_mut_slice()];
        for layer in self.decoder1.iter_mut().chain(self.decoder2.iter_mut()) {
            out.push(layer.weight.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![self.encoder.as_slice()];
        for layer in self.decoder1.iter().chain(self.decoder2.iter()) {
            out.push(layer.weight.as_slice());
            out.push(&layer.bias);
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }
}

fn check_decoder(name: &str, layers: &[FcLayer], inputs: usize, outputs: usize) -> Result<()> {
    if layers.len() != 3 {
        return Err(Error::shape(format!(
            "{name} must have 3 layers, has {}",
            layers.len()
        )));
    }
    if layers[0].inputs() != inputs {
        return Err(Error::shape(format!(
            "{name} takes {} inputs, expected {inputs}",
            layers[0].inputs()
        )));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].outputs() != pair[1].inputs() {
            return Err(Error::shape(format!(
                "{name} layers {i} and {} disagree",
                i + 1
            )));
        }
    }
    if layers[2].outputs() != outputs {
        return Err(Error::shape(format!(
            "{name} emits {} values, expected {outputs}",
            layers[2].outputs()
        )));
    }
    if layers[2].activation != Activation::None {
        return Err(Error::shape(format!("{name} output layer must be linear")));
    }
    Ok(())
}
