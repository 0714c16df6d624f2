use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{duplicate_pool, load_csv_dataset, load_csv_split, synth_blobs, synth_ood_generator, BlobSpec, Dataset};
use crate::acquisition::Strategy;
use crate::ensemble::{EnsembleConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;

/// Where the rows of a run come from. Relative paths resolve against the
/// directory holding the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Csv {
        train: PathBuf,
        /// Separate test file. Without one, `test_fraction` of the rows is held out.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test: Option<PathBuf>,
        label_column: String,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
    Blobs(BlobSpec),
    /// The in-distribution half of the OOD fixture.
    SynthOod {
        #[serde(default)]
        seed: u64,
    },
}

fn default_test_fraction() -> f64 {
    0.2
}

impl DatasetSpec {
    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        match self {
            DatasetSpec::Csv {
                train,
                test,
                label_column,
                test_fraction,
                split_seed,
            } => {
                let train = base_dir.join(train);
                match test {
                    Some(test) => load_csv_split(&train, &base_dir.join(test), label_column),
                    None => load_csv_dataset(&train, label_column)?.with_random_split(*test_fraction, *split_seed),
                }
            }
            DatasetSpec::Blobs(spec) => Ok(synth_blobs(spec)),
            DatasetSpec::SynthOod { seed } => Ok(synth_ood_generator(*seed).0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    pub gamma: f64,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self { gamma: 0.4 }
    }
}

/// A benchmark run, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub strategies: Vec<Strategy>,
    /// Acquisition batch size K.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Explicit seeds. Defaults to `0..repeats`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_budget: Option<usize>,
    #[serde(default = "default_duplication")]
    pub duplication_factor: usize,
    pub output: PathBuf,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
}

fn default_batch_size() -> usize {
    20
}

fn default_n_init() -> usize {
    20
}

fn default_repeats() -> usize {
    5
}

fn default_duplication() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies must not be empty".into()));
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(Error::Config("strategies must not repeat".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be at least 1".into()));
        }
        if self.duplication_factor == 0 {
            return Err(Error::Config("duplication_factor must be at least 1".into()));
        }
        if self.seeds().is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.ensemble.dim == 0 || self.ensemble.members == 0 {
            return Err(Error::Config("ensemble dim and members must be positive".into()));
        }
        if !(self.ensemble.bandwidth > 0.0 && self.ensemble.bandwidth.is_finite()) {
            return Err(Error::Config("ensemble bandwidth must be positive".into()));
        }
        self.train.validate()?;
        self.learner(self.strategies[0], 0).acquisition().validate()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..self.repeats as u64).collect())
    }

    /// The dataset after duplication.
    pub fn load_dataset(&self, base_dir: &Path) -> Result<Dataset> {
        duplicate_pool(&self.dataset.load(base_dir)?, self.duplication_factor)
    }

    pub fn output_dir(&self, base_dir: &Path) -> PathBuf {
        base_dir.join(&self.output)
    }

    pub fn learner(&self, strategy: Strategy, seed: u64) -> LearnerConfig {
        LearnerConfig {
            strategy,
            batch_size: self.batch_size,
            n_init: self.n_init,
            gamma: self.acquisition.gamma,
            seed,
            label_budget: self.label_budget,
            ensemble: self.ensemble.clone(),
            train: self.train.clone(),
        }
    }
}
