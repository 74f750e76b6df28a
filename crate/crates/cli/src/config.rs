use std::path::Path;

use olsr_core::data::SynthSpec;
use olsr_core::scoring::ScoringOptions;
use olsr_core::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Declarative run configuration; every section is optional in the file and
/// defaults to the canonical hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthSpec,
    pub scoring: ScoringOptions,
    /// λ grid for `sweep`.
    pub lambdas: Vec<f64>,
    /// Recall target for the validation threshold.
    pub target_tpr: f64,
}

impl RunConfig {
    pub fn canonical() -> Self {
        Self {
            lambdas: vec![0.01, 0.1, 1.0, 10.0],
            target_tpr: 0.95,
            ..Default::default()
        }
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::canonical());
        };
        let text = std::fs::read_to_string(path)?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let canonical = Self::canonical();
        if cfg.lambdas.is_empty() {
            cfg.lambdas = canonical.lambdas;
        }
        if cfg.target_tpr == 0.0 {
            cfg.target_tpr = canonical.target_tpr;
        }
        Ok(cfg)
    }
}

/// Fails fast on missing inputs so nothing is written before work starts.
pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::Core(olsr_core::Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{what} {} does not exist", path.display()),
        ))));
    }
    Ok(())
}
