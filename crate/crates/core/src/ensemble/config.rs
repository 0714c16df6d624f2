use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a sub-model's static prior enters its class scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// `δ(h, m) + δ(h, mᵖ)`, each term normalized on its own.
    #[default]
    Isolated,
    /// `δ(h, m ⊕ mᵖ)`.
    Combined,
    /// `δ(h, m)`; priors are ignored.
    None,
}

impl PriorMode {
    pub const ALL: [PriorMode; 3] = [PriorMode::None, PriorMode::Combined, PriorMode::Isolated];

    pub fn as_str(self) -> &'static str {
        match self {
            PriorMode::Isolated => "isolated",
            PriorMode::Combined => "combined",
            PriorMode::None => "none",
        }
    }
}

impl std::fmt::Display for PriorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dimension regeneration schedule applied during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegenConfig {
    /// Regenerate after every this many epochs.
    pub every_epochs: usize,
    /// Fraction of dimensions replaced per event, in [0, 1).
    pub fraction: f64,
}

impl Default for RegenConfig {
    fn default() -> Self {
        Self {
            every_epochs: 5,
            fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub target_train_accuracy: f64,
    pub bootstrap: bool,
    pub prior_mode: PriorMode,
    pub regen: Option<RegenConfig>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_epochs: 100,
            target_train_accuracy: 0.99,
            bootstrap: true,
            prior_mode: PriorMode::Isolated,
            regen: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if !(self.target_train_accuracy > 0.0 && self.target_train_accuracy <= 1.0) {
            return Err(Error::Config(format!(
                "target_train_accuracy must be in (0, 1], got {}",
                self.target_train_accuracy
            )));
        }
        if let Some(regen) = &self.regen {
            if regen.every_epochs == 0 {
                return Err(Error::Config("regen.every_epochs must be positive".into()));
            }
            check_regen_fraction(regen.fraction)?;
        }
        Ok(())
    }
}

pub(crate) fn check_regen_fraction(fraction: f64) -> Result<()> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "regeneration fraction must be in [0, 1), got {fraction}"
        )));
    }
    Ok(())
}

/// Shape of an ensemble: dimensionality, member count and encoder bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub dim: usize,
    pub members: usize,
    pub bandwidth: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            dim: 2000,
            members: 8,
            bandwidth: 1.0,
        }
    }
}
