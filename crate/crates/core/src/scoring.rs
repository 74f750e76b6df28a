//! Normality scoring: norm-normalized residuals, Gaussian CDF/CCDF factors
//! and their product.

use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::detector::{Calibration, DetectorModel, GaussianFit};
use crate::nn::{l2_norm, softmax::argmax, NORM_GUARD};
use crate::{Error, Result};

/// How reconstruction residuals are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    /// `‖f/‖f‖ − f̂/‖f‖‖`.
    #[default]
    Nl2,
    /// Raw `‖f − f̂‖`.
    L2,
}

/// Which factors enter the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    /// Confidence CDF × feature-residual CCDF × latent-residual CCDF.
    #[default]
    Layerwise,
    /// Feature-residual CCDF alone: plain input-reconstruction scoring.
    Basic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringOptions {
    pub distance: Distance,
    pub framework: Framework,
    /// When false every `ε` is treated as zero.
    pub epsilon: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            distance: Distance::Nl2,
            framework: Framework::Layerwise,
            epsilon: true,
        }
    }
}

/// Normalized L2 distance: both `f` and its reconstruction are divided by `‖f‖`.
pub fn nl2(f: &[f64], f_hat: &[f64]) -> Result<f64> {
    if f.len() != f_hat.len() {
        return Err(Error::shape(format!(
            "nl2 of lengths {} and {}",
            f.len(),
            f_hat.len()
        )));
    }
    let norm = l2_norm(f);
    if norm.is_nan() || norm <= NORM_GUARD {
        return Err(Error::Degenerate(format!(
            "target norm {norm:e} is at or below the guard"
        )));
    }
    Ok(f.iter()
        .zip(f_hat)
        .map(|(a, b)| {
            let d = a / norm - b / norm;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

pub fn l2_distance(f: &[f64], f_hat: &[f64]) -> f64 {
    f.iter()
        .zip(f_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn distance(kind: Distance, f: &[f64], f_hat: &[f64]) -> Result<f64> {
    match kind {
        Distance::Nl2 => nl2(f, f_hat),
        Distance::L2 => Ok(l2_distance(f, f_hat)),
    }
}

/// Standard normal CDF via `erfc`.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn cdf_with_scale(x: f64, mu: f64, scale: f64, upper: bool) -> f64 {
    if scale == 0.0 {
        return if x == mu {
            0.5
        } else if (x > mu) != upper {
            1.0
        } else {
            0.0
        };
    }
    let z = (x - mu) / scale;
    standard_normal_cdf(if upper { -z } else { z })
}

/// Gaussian CDF at `x` with mean `μ` and scale `σ + ε`; a step at `μ` when the scale is 0.
pub fn phi(x: f64, g: &GaussianFit) -> f64 {
    cdf_with_scale(x, g.mu, g.scale(), false)
}

/// Gaussian CCDF, `1 − phi`.
pub fn psi(x: f64, g: &GaussianFit) -> f64 {
    cdf_with_scale(x, g.mu, g.scale(), true)
}

/// Per-sample statistics the score factors are computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorInputs {
    /// Largest entry of `S(Wv/T)`.
    pub conf: f64,
    /// Residual of `v` against `D1(Wv)`.
    pub r1: f64,
    /// Residual of `Wv/T` against `D2(S(Wv/T))`.
    pub r2: f64,
    pub predicted: usize,
}

pub fn factor_inputs(model: &DetectorModel, v: &[f64], dist: Distance) -> Result<FactorInputs> {
    if v.len() != model.dim() {
        return Err(Error::Dimension(format!(
            "feature has {} entries, model expects H={}",
            v.len(),
            model.dim()
        )));
    }
    let v_norm = l2_norm(v);
    if v_norm.is_nan() || v_norm <= NORM_GUARD {
        return Err(Error::Degenerate(format!("feature norm {v_norm:e}")));
    }
    let logits = model.logits(v);
    let z_norm = l2_norm(&logits);
    if z_norm.is_nan() || z_norm <= NORM_GUARD {
        return Err(Error::Degenerate(format!("logit norm {z_norm:e}")));
    }
    let v_hat = crate::nn::forward_value(&model.decoder1, &logits)?;
    let (scaled, probs, rebuilt) = model.latent_round_trip(&logits)?;
    let predicted = argmax(&probs);
    Ok(FactorInputs {
        conf: probs[predicted],
        r1: distance(dist, v, &v_hat)?,
        r2: distance(dist, &scaled, &rebuilt)?,
        predicted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBundle {
    pub conf: f64,
    pub r1: f64,
    pub r2: f64,
    pub phi0: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub score: f64,
    pub predicted: usize,
}

/// Combines already-computed statistics into factors and a score.
pub fn combine(
    inputs: &FactorInputs,
    calibration: &Calibration,
    opts: &ScoringOptions,
) -> ScoreBundle {
    let cal = if opts.epsilon {
        *calibration
    } else {
        calibration.without_epsilon()
    };
    let phi0 = phi(inputs.conf, &cal.confidence);
    let psi1 = psi(inputs.r1, &cal.feature);
    let psi2 = psi(inputs.r2, &cal.latent);
    let score = match opts.framework {
        Framework::Layerwise => phi0 * psi1 * psi2,
        Framework::Basic => psi1,
    };
    ScoreBundle {
        conf: inputs.conf,
        r1: inputs.r1,
        r2: inputs.r2,
        phi0,
        psi1,
        psi2,
        score,
        predicted: inputs.predicted,
    }
}

/// Normality score of one feature vector. Higher means more in-distribution.
pub fn normality_score(
    model: &DetectorModel,
    calibration: &Calibration,
    v: &[f64],
    opts: &ScoringOptions,
) -> Result<ScoreBundle> {
    let inputs = factor_inputs(model, v, opts.distance)?;
    Ok(combine(&inputs, calibration, opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Id,
    Ood,
}

/// One scored sample. Samples that trip the zero-norm guard carry score 0,
/// `flagged = true` and NaN statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub index: usize,
    pub conf: f64,
    pub r1: f64,
    pub r2: f64,
    pub phi0: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub score: f64,
    pub decision: Decision,
    pub flagged: bool,
}

impl ScoreRow {
    fn from_bundle(index: usize, b: &ScoreBundle, threshold: f64) -> Self {
        Self {
            index,
            conf: b.conf,
            r1: b.r1,
            r2: b.r2,
            phi0: b.phi0,
            psi1: b.psi1,
            psi2: b.psi2,
            score: b.score,
            decision: if b.score < threshold {
                Decision::Ood
            } else {
                Decision::Id
            },
            flagged: false,
        }
    }

    fn flagged(index: usize) -> Self {
        Self {
            index,
            conf: f64::NAN,
            r1: f64::NAN,
            r2: f64::NAN,
            phi0: 0.0,
            psi1: 0.0,
            psi2: 0.0,
            score: 0.0,
            decision: Decision::Ood,
            flagged: true,
        }
    }
}

/// Scores every sample in input order; guard violations become flagged rows.
pub fn score_set(
    model: &DetectorModel,
    calibration: &Calibration,
    set: &FeatureSet,
    opts: &ScoringOptions,
    threshold: f64,
) -> Result<Vec<ScoreRow>> {
    if set.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "features have H={}, model expects H={}",
            set.dim(),
            model.dim()
        )));
    }
    (0..set.len())
        .map(
            |i| match normality_score(model, calibration, &set.row_f64(i), opts) {
                Ok(b) => Ok(ScoreRow::from_bundle(i, &b, threshold)),
                Err(Error::Degenerate(msg)) => {
                    log::warn!("sample {i} flagged: {msg}");
                    Ok(ScoreRow::flagged(i))
                }
                Err(e) => Err(e),
            },
        )
        .collect()
}

/// Plain scores for a set, with flagged samples scored 0.
pub fn scores(
    model: &DetectorModel,
    calibration: &Calibration,
    set: &FeatureSet,
    opts: &ScoringOptions,
) -> Result<Vec<f64>> {
    Ok(score_set(model, calibration, set, opts, 0.0)?
        .into_iter()
        .map(|r| r.score)
        .collect())
}

/// Lower-interpolated `(1 − target_tpr)` quantile of ID validation scores.
/// Samples scoring strictly below it are declared OoD.
pub fn threshold_from_validation(val_scores: &[f64], target_tpr: f64) -> Result<f64> {
    if val_scores.is_empty() {
        return Err(Error::Calibration("no validation scores".into()));
    }
    if !(target_tpr > 0.0 && target_tpr <= 1.0) {
        return Err(Error::param(format!(
            "target TPR must be in (0, 1], got {target_tpr}"
        )));
    }
    let mut sorted = val_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = ((1.0 - target_tpr) * (sorted.len() - 1) as f64).floor() as usize;
    Ok(sorted[pos.min(sorted.len() - 1)])
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn g(mu: f64, sigma: f64, epsilon: f64) -> GaussianFit {
        GaussianFit { mu, sigma, epsilon }
    }

    #[test]
    fn nl2_examples() {
        assert_eq!(nl2(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((nl2(&[3.0, -1.0, 7.0], &[0.0; 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!((nl2(&[3.0, 4.0], &[0.0, 4.0]).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(
            nl2(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(nl2(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn phi_psi_values() {
        let fit = g(0.3, 0.1, 0.0);
        assert_eq!(phi(0.3, &fit), 0.5);
        assert_eq!(psi(0.3, &fit), 0.5);
        // 0.5·erfc(−1/√2) at 30 digits (mpmath): 0.841344746068542948585…
        assert!((phi(0.4, &fit) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((standard_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        let widened = g(0.0, 1.0, 1.0);
        assert!((phi(2.0, &widened) - standard_normal_cdf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_step() {
        let fit = g(0.5, 0.0, 0.0);
        assert_eq!(phi(0.4, &fit), 0.0);
        assert_eq!(phi(0.6, &fit), 1.0);
        assert_eq!(phi(0.5, &fit), 0.5);
        assert_eq!(psi(0.4, &fit), 1.0);
        assert_eq!(psi(0.6, &fit), 0.0);
        assert_eq!(psi(0.5, &fit), 0.5);
    }

    #[test]
    fn at_the_means_the_score_is_an_eighth() {
        let cal = Calibration::from_fits([g(0.2, 0.01, 0.1), g(0.3, 0.05, 0.5), g(0.1, 0.02, 0.2)]);
        let inputs = FactorInputs {
            conf: 0.2,
            r1: 0.3,
            r2: 0.1,
            predicted: 0,
        };
        let b = combine(&inputs, &cal, &ScoringOptions::default());
        assert_eq!(b.score, 0.125);
        let basic = combine(
            &inputs,
            &cal,
            &ScoringOptions {
                framework: Framework::Basic,
                ..Default::default()
            },
        );
        assert_eq!(basic.score, 0.5);
    }

    #[test]
    fn epsilon_flag_changes_scale() {
        let cal = Calibration::from_fits([g(0.2, 0.01, 0.1); 3]);
        let inputs = FactorInputs {
            conf: 0.25,
            r1: 0.25,
            r2: 0.25,
            predicted: 0,
        };
        let with = combine(&inputs, &cal, &ScoringOptions::default());
        let without = combine(
            &inputs,
            &cal,
            &ScoringOptions {
                epsilon: false,
                ..Default::default()
            },
        );
        assert!((with.phi0 - standard_normal_cdf(0.05 / 0.11)).abs() < 1e-15);
        assert!((without.phi0 - standard_normal_cdf(5.0)).abs() < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        let s: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let t = threshold_from_validation(&s, 0.95).unwrap();
        assert_eq!(t, 0.04);
        assert!(s.iter().filter(|&&x| x >= t).count() >= 95);

        let same = vec![0.3; 10];
        let t = threshold_from_validation(&same, 0.95).unwrap();
        assert_eq!(t, 0.3);
        assert!(same.iter().all(|&x| x >= t));

        let uniform: Vec<f64> = (1..=1000).rev().map(f64::from).collect();
        assert_eq!(threshold_from_validation(&uniform, 0.9).unwrap(), 100.0);
        assert!(threshold_from_validation(&[], 0.95).is_err());
    }

    proptest! {
        #[test]
        fn nl2_scale_invariant(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..16),
            log_alpha in -6.0f64..6.0,
        ) {
            let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let fh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(l2_norm(&f) > 1e-3);
            let a = 10f64.powf(log_alpha);
            let sf: Vec<f64> = f.iter().map(|x| a * x).collect();
            let sfh: Vec<f64> = fh.iter().map(|x| a * x).collect();
            prop_assert!((nl2(&f, &fh).unwrap() - nl2(&sf, &sfh).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn phi_plus_psi_is_one(x in -1e3f64..1e3, mu in -5.0f64..5.0, s in 0.0f64..10.0, e in 0.0f64..10.0) {
            let fit = g(mu, s, e);
            prop_assert!((phi(x, &fit) + psi(x, &fit) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn score_is_a_probability(
            conf in 0.0f64..1.0, r1 in 0.0f64..3.0, r2 in 0.0f64..3.0,
            mus in prop::array::uniform3(0.0f64..1.0),
            sig in prop::array::uniform3(0.0f64..0.5),
        ) {
            let cal = Calibration::from_fits([
                g(mus[0], sig[0], 10.0 * sig[0]),
                g(mus[1], sig[1], 10.0 * sig[1]),
                g(mus[2], sig[2], 10.0 * sig[2]),
            ]);
            let b = combine(&FactorInputs { conf, r1, r2, predicted: 0 }, &cal, &ScoringOptions::default());
            prop_assert!((0.0..=1.0).contains(&b.score));
            prop_assert_eq!(b.score, b.phi0 * b.psi1 * b.psi2);
        }
    }
}
