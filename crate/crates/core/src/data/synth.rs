use serde::{Deserialize, Serialize};

use super::rng::{stream, CounterRng};
use super::{FeatureSet, UNLABELED};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OodKind {
    /// Clusters moved toward held-out mean directions by `ood_shift`.
    Shifted,
    /// In-distribution samples with their norm multiplied by `ood_norm_multiplier`.
    ScaledNorm,
    /// Uniform samples in `[0, 2·mean_scale]^H`.
    Uniform,
}

/// Generator parameters. ID features are `relu(μ_y + σ·ε)` with class means
/// `μ_c = mean_scale·|g|`, `g ~ N(0, I)`, drawn from `cluster_seed`; sample
/// draws come from `seed`, and class labels cycle `0, 1, …, C−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    pub samples: usize,
    pub mean_scale: f64,
    pub within_sigma: f64,
    pub cluster_seed: u64,
    pub seed: u64,
    pub ood_kind: OodKind,
    pub ood_norm_multiplier: f64,
    /// Interpolation from the ID means (0) to the held-out means (1).
    pub ood_shift: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 64,
            samples: 5000,
            mean_scale: 1.0,
            within_sigma: 0.6,
            cluster_seed: 0,
            seed: 0,
            ood_kind: OodKind::ScaledNorm,
            ood_norm_multiplier: 0.5,
            ood_shift: 1.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if self.classes == 0 || self.dim == 0 || self.samples == 0 {
            return bad("classes, dim and samples must be positive".into());
        }
        for (name, v) in [
            ("mean_scale", self.mean_scale),
            ("within_sigma", self.within_sigma),
            ("ood_norm_multiplier", self.ood_norm_multiplier),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.ood_shift) {
            return bad(format!(
                "ood_shift must be in [0, 1], got {}",
                self.ood_shift
            ));
        }
        if self.dim < self.classes {
            log::warn!(
                "synthetic dim {} is below class count {}; clusters will overlap heavily",
                self.dim,
                self.classes
            );
        }
        Ok(())
    }

    /// `2C` mean vectors: the ID class means followed by held-out ones.
    fn means(&self) -> Vec<Vec<f64>> {
        let mut rng = CounterRng::new(self.cluster_seed, stream::CLUSTERS);
        (0..2 * self.classes)
            .map(|_| {
                (0..self.dim)
                    .map(|_| self.mean_scale * rng.normal().abs())
                    .collect()
            })
            .collect()
    }
}

fn cluster_sample(mean: &[f64], sigma: f64, rng: &mut CounterRng, out: &mut Vec<f32>, scale: f64) {
    for &m in mean {
        let x = (m + sigma * rng.normal()).max(0.0);
        out.push((scale * x) as f32);
    }
}

/// Labeled in-distribution features.
pub fn synth_id(spec: &SynthSpec) -> Result<FeatureSet> {
    spec.validate()?;
    let means = spec.means();
    let mut rng = CounterRng::new(spec.seed, stream::SAMPLES);
    let mut features = Vec::with_capacity(spec.samples * spec.dim);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let y = i % spec.classes;
        cluster_sample(&means[y], spec.within_sigma, &mut rng, &mut features, 1.0);
        labels.push(y as i32);
    }
    FeatureSet::new(spec.dim, spec.classes, features, labels)
}

/// Unlabeled OoD features of kind `spec.ood_kind`, sharing the class geometry
/// (`classes`, `dim`, `mean_scale`, `within_sigma`, `cluster_seed`) of `id_spec`.
/// Sample count and seed come from `spec`.
pub fn synth_ood(spec: &SynthSpec, id_spec: &SynthSpec) -> Result<FeatureSet> {
    spec.validate()?;
    id_spec.validate()?;
    let means = id_spec.means();
    let (c, h) = (id_spec.classes, id_spec.dim);
    let mut rng = CounterRng::new(spec.seed, stream::SAMPLES);
    let mut features = Vec::with_capacity(spec.samples * h);
    for i in 0..spec.samples {
        let y = i % c;
        match spec.ood_kind {
            OodKind::ScaledNorm => cluster_sample(
                &means[y],
                id_spec.within_sigma,
                &mut rng,
                &mut features,
                spec.ood_norm_multiplier,
            ),
            OodKind::Shifted => {
                let s = spec.ood_shift;
                let center: Vec<f64> = means[y]
                    .iter()
                    .zip(&means[c + y])
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect();
                cluster_sample(&center, id_spec.within_sigma, &mut rng, &mut features, 1.0);
            }
            OodKind::Uniform => {
                for _ in 0..h {
                    features.push(rng.uniform_range(0.0, 2.0 * id_spec.mean_scale) as f32);
                }
            }
        }
    }
    FeatureSet::new(h, c, features, vec![UNLABELED; spec.samples])
}
