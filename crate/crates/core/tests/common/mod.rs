#![allow(dead_code)]

use olsr_core::data::{split, synth_id, synth_ood, OodKind, SynthSpec};
use olsr_core::detector::{fit_gaussians, train, TrainConfig, TrainLog};
use olsr_core::scoring::Distance;
use olsr_core::{Calibration, DetectorModel, FeatureSet};

/// The desk-scale benchmark: 10 classes, H = 64, 5000 train / 500 val.
pub fn benchmark_spec() -> SynthSpec {
    SynthSpec {
        samples: 5500,
        cluster_seed: 1,
        seed: 2,
        ..SynthSpec::default()
    }
}

pub fn benchmark_split() -> (FeatureSet, FeatureSet) {
    let full = synth_id(&benchmark_spec()).unwrap();
    split(&full, 500.0 / 5500.0, 3).unwrap()
}

pub fn ood(kind: OodKind, seed: u64, samples: usize) -> FeatureSet {
    let id = benchmark_spec();
    let spec = SynthSpec {
        samples,
        seed,
        ood_kind: kind,
        ..id.clone()
    };
    synth_ood(&spec, &id).unwrap()
}

pub struct Toy {
    pub train: FeatureSet,
    pub val: FeatureSet,
    pub model: DetectorModel,
    pub calibration: Calibration,
    pub log: TrainLog,
}

/// A small detector trained for a few seconds at most.
pub fn toy(lambda: f64) -> Toy {
    let spec = SynthSpec {
        classes: 4,
        dim: 16,
        samples: 1200,
        cluster_seed: 7,
        seed: 8,
        ..SynthSpec::default()
    };
    let (train_set, val) = split(&synth_id(&spec).unwrap(), 0.2, 9).unwrap();
    let cfg = TrainConfig {
        lambda,
        epochs: 60,
        batch_size: 32,
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let (model, log) = train(&train_set, &cfg, None).unwrap();
    let calibration =
        fit_gaussians(&model, &val, cfg.epsilon_multipliers(), Distance::Nl2).unwrap();
    Toy {
        train: train_set,
        val,
        model,
        calibration,
        log,
    }
}
