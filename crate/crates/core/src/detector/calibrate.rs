use serde::{Deserialize, Serialize};

use super::DetectorModel;
use crate::data::FeatureSet;
use crate::scoring::{factor_inputs, Distance};
use crate::{Error, Result};

/// Gaussian `(μ, σ)` fitted by maximum likelihood, widened by `ε = k·σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    pub epsilon: f64,
}

impl GaussianFit {
    /// Sample mean and population standard deviation. Values are sorted before
    /// summation, so the fit does not depend on their order.
    pub fn fit(values: &[f64], k: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Calibration(format!(
                "need at least 2 values to fit a Gaussian, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Calibration("non-finite statistic".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mu = sorted.iter().sum::<f64>() / n;
        let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mu) * (v - mu)).collect();
        dev.sort_by(f64::total_cmp);
        let sigma = (dev.iter().sum::<f64>() / n).sqrt();
        Ok(Self {
            mu,
            sigma,
            epsilon: k * sigma,
        })
    }

    /// Effective scale `σ + ε`.
    pub fn scale(&self) -> f64 {
        self.sigma + self.epsilon
    }

    pub fn without_epsilon(self) -> Self {
        Self {
            epsilon: 0.0,
            ..self
        }
    }
}

/// One fit per score factor: max softmax confidence, feature residual,
/// latent residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub confidence: GaussianFit,
    pub feature: GaussianFit,
    pub latent: GaussianFit,
}

impl Calibration {
    pub fn fits(&self) -> [GaussianFit; 3] {
        [self.confidence, self.feature, self.latent]
    }

    pub fn from_fits(fits: [GaussianFit; 3]) -> Self {
        Self {
            confidence: fits[0],
            feature: fits[1],
            latent: fits[2],
        }
    }

    pub fn without_epsilon(self) -> Self {
        Self::from_fits(self.fits().map(GaussianFit::without_epsilon))
    }
}

/// Fits the three factor Gaussians on validation features. `k` holds the ε
/// multiplier per factor. Samples that trip the zero-norm guard are skipped.
pub fn fit_gaussians(
    model: &DetectorModel,
    val: &FeatureSet,
    k: [f64; 3],
    distance: Distance,
) -> Result<Calibration> {
    if val.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "validation features have H={}, model expects {}",
            val.dim(),
            model.dim()
        )));
    }
    let mut stats: [Vec<f64>; 3] = Default::default();
    let mut skipped = 0;
    for i in 0..val.len() {
        match factor_inputs(model, &val.row_f64(i), distance) {
            Ok(f) => {
                stats[0].push(f.conf);
                stats[1].push(f.r1);
                stats[2].push(f.r2);
            }
            Err(Error::Degenerate(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} validation samples skipped by the zero-norm guard");
    }
    Ok(Calibration {
        confidence: GaussianFit::fit(&stats[0], k[0])?,
        feature: GaussianFit::fit(&stats[1], k[1])?,
        latent: GaussianFit::fit(&stats[2], k[2])?,
    })
}
