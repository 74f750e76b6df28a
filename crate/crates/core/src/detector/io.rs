use std::fs;
use std::path::Path;

use super::{Calibration, DetectorModel, GaussianFit};
use crate::nn::{Activation, DenseMatrix, FcLayer};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"OLSR";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8 + 4 * 4;

/// Everything needed to score: the trained model plus its calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedDetector {
    pub model: DetectorModel,
    pub calibration: Calibration,
    pub epsilon_multiplier: f64,
}

/// Little-endian layout:
///
/// ```text
/// "OLSR" | version u32 | H u32 | C u32 | T f64 | k f64
/// | D1 hidden widths 2×u32 | D2 hidden widths 2×u32
/// | f64 blobs: W, then weight/bias of each D1 layer, then of each D2 layer
/// | (μ, σ, ε) f64 × 3: confidence, feature, latent
/// ```
pub fn encode_model(saved: &SavedDetector) -> Vec<u8> {
    let m = &saved.model;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.param_shapes().iter().sum::<usize>() + 72);
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.classes() as u32).to_le_bytes());
    buf.extend_from_slice(&m.temperature.to_le_bytes());
    buf.extend_from_slice(&saved.epsilon_multiplier.to_le_bytes());
    let (w1, w2) = m.hidden_widths();
    for w in w1.iter().chain(&w2) {
        buf.extend_from_slice(&(*w as u32).to_le_bytes());
    }
    for blob in m.params() {
        for v in blob {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for g in saved.calibration.fits() {
        for v in [g.mu, g.sigma, g.epsilon] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn save_model(path: impl AsRef<Path>, saved: &SavedDetector) -> Result<()> {
    fs::write(path, encode_model(saved))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::format(format!(
                "model file truncated: need {end} bytes, have {}",
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(8 * n)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn layer(&mut self, inputs: usize, outputs: usize, act: Activation) -> Result<FcLayer> {
        let weight = DenseMatrix::new(outputs, inputs, self.f64s(inputs * outputs)?)?;
        FcLayer::new(weight, self.f64s(outputs)?, act)
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedDetector> {
    let bytes = fs::read(path)?;
    parse_model(&bytes)
}

pub fn parse_model(bytes: &[u8]) -> Result<SavedDetector> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MODEL_MAGIC {
        return Err(Error::format("bad magic, expected \"OLSR\""));
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::format(format!(
            "unsupported model version {version}"
        )));
    }
    let h = c.u32()? as usize;
    let classes = c.u32()? as usize;
    let temperature = c.f64()?;
    let k = c.f64()?;
    let widths: Vec<usize> = (0..4)
        .map(|_| c.u32().map(|w| w as usize))
        .collect::<Result<_>>()?;
    if h == 0 || classes == 0 || widths.contains(&0) {
        return Err(Error::Dimension(format!(
            "header declares H={h}, C={classes}, widths {widths:?}"
        )));
    }

    let params = classes * h
        + [(classes, widths[0]), (widths[0], widths[1]), (widths[1], h)]
            .iter()
            .chain(&[
                (classes, widths[2]),
                (widths[2], widths[3]),
                (widths[3], classes),
            ])
            .map(|(i, o)| i * o + o)
            .sum::<usize>();
    let expected = HEADER_LEN + 8 * params + 72;
    if bytes.len() != expected {
        return Err(Error::Dimension(format!(
            "header (H={h}, C={classes}, widths {widths:?}) implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }

    let encoder = DenseMatrix::new(classes, h, c.f64s(classes * h)?)?;
    let decoder1 = vec![
        c.layer(classes, widths[0], Activation::Relu)?,
        c.layer(widths[0], widths[1], Activation::Relu)?,
        c.layer(widths[1], h, Activation::None)?,
    ];
    let decoder2 = vec![
        c.layer(classes, widths[2], Activation::Relu)?,
        c.layer(widths[2], widths[3], Activation::Relu)?,
        c.layer(widths[3], classes, Activation::None)?,
    ];
    let model = DetectorModel::new(encoder, decoder1, decoder2, temperature)?;
    let mut fits = [GaussianFit {
        mu: 0.0,
        sigma: 0.0,
        epsilon: 0.0,
    }; 3];
    for fit in &mut fits {
        *fit = GaussianFit {
            mu: c.f64()?,
            sigma: c.f64()?,
            epsilon: c.f64()?,
        };
        if !(fit.mu.is_finite()
            && fit.sigma >= 0.0
            && fit.epsilon >= 0.0
            && fit.scale().is_finite())
        {
            return Err(Error::format(format!("invalid calibration triple {fit:?}")));
        }
    }
    Ok(SavedDetector {
        model,
        calibration: Calibration::from_fits(fits),
        epsilon_multiplier: k,
    })
}
