use serde::{Deserialize, Serialize};

use super::DetectorModel;
use crate::data::rng::{stream, CounterRng};
use crate::data::FeatureSet;
use crate::nn::{
    adam_step, loss_accumulate, AdamState, DenseMatrix, LossOptions, LossTerms, ModelGrads,
    ReconLoss,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the cross-entropy regularizer.
    pub lambda: f64,
    pub temperature: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Decoder hidden width; `None` means `max(H, 4C)`.
    pub hidden_width: Option<usize>,
    pub loss: ReconLoss,
    pub detach_l2_target: bool,
    /// `k` in `ε = k·σ`, applied to every score factor unless overridden.
    pub epsilon_multiplier: f64,
    /// Per-factor `k` for (confidence, feature residual, latent residual).
    pub epsilon_multipliers: Option<[f64; 3]>,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            temperature: 100.0,
            lr: 1e-4,
            batch_size: 128,
            epochs: 300,
            seed: 0,
            hidden_width: None,
            loss: ReconLoss::Norm,
            detach_l2_target: false,
            epsilon_multiplier: 10.0,
            epsilon_multipliers: None,
            val_fraction: 0.04,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("temperature", self.temperature), ("lr", self.lr)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden_width == Some(0) {
            return Err(Error::param(
                "batch_size, epochs and hidden_width must be positive",
            ));
        }
        if self
            .epsilon_multipliers()
            .iter()
            .any(|k| !(*k >= 0.0 && k.is_finite()))
        {
            return Err(Error::param("epsilon multipliers must be non-negative"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction <= 0.5) {
            return Err(Error::param(format!(
                "val_fraction must be in (0, 0.5], got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }

    pub fn epsilon_multipliers(&self) -> [f64; 3] {
        self.epsilon_multipliers
            .unwrap_or([self.epsilon_multiplier; 3])
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions {
            lambda: self.lambda,
            recon: self.loss,
            detach_l2_target: self.detach_l2_target,
        }
    }
}

/// Mean per-sample loss terms over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l1: f64,
    pub l2: f64,
    pub reg: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub updates: usize,
    pub regularizer_disabled: bool,
    pub epochs: Vec<EpochLog>,
}

/// Step-decayed learning rate: ×0.1 from 50% of all updates, ×0.01 from 75%.
pub fn learning_rate_at(base: f64, update: usize, total: usize) -> f64 {
    let mut lr = base;
    if 2 * update >= total {
        lr *= 0.1;
    }
    if 4 * update >= 3 * total {
        lr *= 0.1;
    }
    lr
}

/// Trains encoder and decoders with Adam on shuffled mini-batches.
///
/// Per-batch gradients are the mean of per-sample gradients, summed in batch
/// order. The shuffle, the initialization and therefore the result depend
/// only on `config` and the data.
pub fn train(
    features: &FeatureSet,
    config: &TrainConfig,
    init_encoder: Option<DenseMatrix>,
) -> Result<(DetectorModel, TrainLog)> {
    config.validate()?;
    let labels = features.class_labels()?;
    let n = features.len();
    if n < config.batch_size {
        return Err(Error::param(format!(
            "{n} training samples is fewer than one batch of {}",
            config.batch_size
        )));
    }
    let (dim, classes) = (features.dim(), features.classes());
    let hidden = config
        .hidden_width
        .unwrap_or_else(|| super::default_hidden_width(dim, classes));
    let mut model = DetectorModel::init(
        dim,
        classes,
        hidden,
        config.temperature,
        config.seed,
        init_encoder,
    )?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| features.row_f64(i)).collect();

    let opts = config.loss_options();
    let mut adam = AdamState::new(model.param_shapes(), config.lr);
    let mut grads = ModelGrads::zeros_like(&model);
    let mut rng = CounterRng::new(config.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..n).collect();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_updates = batches_per_epoch * config.epochs;
    if opts.lambda == 0.0 {
        log::info!("regularizer disabled (lambda = 0)");
    }

    let mut log = TrainLog {
        updates: total_updates,
        regularizer_disabled: opts.lambda == 0.0,
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut update = 0;
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut sums = LossTerms::default();
        let mut lr = config.lr;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.clear();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let terms = loss_accumulate(&model, &rows[i], labels[i], &opts, &mut grads, scale)?;
                if !terms.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        batch,
                        detail: format!("loss terms {terms:?} at sample {i}"),
                    });
                }
                sums.l1 += terms.l1;
                sums.l2 += terms.l2;
                sums.reg += terms.reg;
            }
            lr = learning_rate_at(config.lr, update, total_updates);
            adam.lr = lr;
            let grad_slices = grads.as_slices();
            adam_step(&mut model.params_mut(), &grad_slices, &mut adam).map_err(|e| match e {
                Error::NonFinite(detail) => Error::Divergence {
                    epoch,
                    batch,
                    detail,
                },
                other => other,
            })?;
            update += 1;
        }
        let entry = EpochLog {
            epoch,
            l1: sums.l1 / n as f64,
            l2: sums.l2 / n as f64,
            reg: sums.reg / n as f64,
            lr,
        };
        log::debug!(
            "epoch {epoch}: l1 {:.6} l2 {:.6} reg {:.6} lr {lr:e}",
            entry.l1,
            entry.l2,
            entry.reg
        );
        log.epochs.push(entry);
    }
    if !model.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            batch: 0,
            detail: "non-finite parameters after training".into(),
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_id, SynthSpec};

    fn toy(samples: usize) -> FeatureSet {
        synth_id(&SynthSpec {
            classes: 2,
            dim: 4,
            samples,
            within_sigma: 0.2,
            cluster_seed: 5,
            seed: 6,
            ..Default::default()
        })
        .unwrap()
    }

    fn cfg(epochs: usize, lambda: f64) -> TrainConfig {
        TrainConfig {
            epochs,
            lambda,
            batch_size: 16,
            lr: 1e-3,
            seed: 2,
            ..Default::default()
        }
    }

    #[test]
    fn schedule_boundaries() {
        assert_eq!(learning_rate_at(1.0, 0, 100), 1.0);
        assert_eq!(learning_rate_at(1.0, 49, 100), 1.0);
        assert_eq!(learning_rate_at(1.0, 50, 100), 0.1);
        assert!((learning_rate_at(1.0, 74, 100) - 0.1).abs() < 1e-15);
        assert!((learning_rate_at(1.0, 75, 100) - 0.01).abs() < 1e-15);
        assert!((learning_rate_at(1.0, 99, 100) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn losses_decrease_on_separable_clusters() {
        let (_, log) = train(&toy(256), &cfg(50, 1.0), None).unwrap();
        let (first, last) = (log.epochs[0], *log.epochs.last().unwrap());
        assert!(last.reg < first.reg, "{first:?} -> {last:?}");
        assert!(last.l1 < first.l1, "{first:?} -> {last:?}");
        assert_eq!(log.updates, 50 * 16);
        assert!(!log.regularizer_disabled);
    }

    #[test]
    fn lambda_zero_still_reconstructs() {
        let (_, log) = train(&toy(256), &cfg(50, 0.0), None).unwrap();
        let (first, last) = (log.epochs[0], *log.epochs.last().unwrap());
        assert!(log.regularizer_disabled);
        assert!(last.l1 < first.l1);
        assert!(last.l2 < first.l2);
    }

    #[test]
    fn seed_deterministic() {
        let data = toy(64);
        let (a, la) = train(&data, &cfg(5, 1.0), None).unwrap();
        let (b, lb) = train(&data, &cfg(5, 1.0), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = train(
            &data,
            &TrainConfig {
                seed: 3,
                ..cfg(5, 1.0)
            },
            None,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn preconditions() {
        let data = toy(8);
        assert!(train(&data, &cfg(1, 1.0), None).is_err());
        let bad = TrainConfig {
            temperature: 0.0,
            ..cfg(1, 1.0)
        };
        assert!(train(&toy(64), &bad, None).is_err());
        let unlabeled = FeatureSet::new(1, 2, vec![0.0; 20], vec![-1; 20]).unwrap();
        assert!(train(
            &unlabeled,
            &TrainConfig {
                batch_size: 4,
                ..cfg(1, 1.0)
            },
            None
        )
        .is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy(64);
        let huge = TrainConfig {
            lr: 1e200,
            ..cfg(3, 1.0)
        };
        match train(&data, &huge, None) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
