//! Run configuration, read from TOML.
//!
//! Every table and key is optional and falls back to its default. The
//! master `seed` is fanned out to every consumer; `rng_seed` entries inside
//! `[generation]` and `[partial_failure]` are overwritten by that fan-out.
//!
//! ```toml
//! seed = 2020
//! out_dir = "run"
//!
//! [generation]
//! samples_per_mode = 1500
//!
//! [training]
//! max_epochs = 100
//! batch_size = 32
//!
//! [knn]
//! k = 6
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{ForestConfig, LogRegConfig, ThresholdDetector};
use crate::degradation::GenerationConfig;
use crate::error::{Error, Result};
use crate::neural::TrainingConfig;
use crate::pipeline::{PartialFailureSpec, SplitFractions};
use crate::seeds;

pub const DEFAULT_SEED: u64 = 2020;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k: crate::baselines::knn::DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub generation: GenerationConfig,
    pub split: SplitFractions,
    pub partial_failure: PartialFailureSpec,
    pub training: TrainingConfig,
    pub knn: KnnConfig,
    pub logreg: LogRegConfig,
    pub forest: ForestConfig,
    pub threshold: ThresholdDetector,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("."),
            generation: GenerationConfig::default(),
            split: SplitFractions::default(),
            partial_failure: PartialFailureSpec::default(),
            training: TrainingConfig::default(),
            knn: KnnConfig::default(),
            logreg: LogRegConfig::default(),
            forest: ForestConfig::default(),
            threshold: ThresholdDetector::default(),
        }
    }
}

/// Sub-seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub generation: u64,
    pub split: u64,
    pub mutation: u64,
    pub init: u64,
    pub shuffle: u64,
    pub forest: u64,
    pub logreg: u64,
}

impl SeedPlan {
    pub fn from_master(master: u64) -> Self {
        SeedPlan {
            generation: seeds::derive_seed(master, seeds::PURPOSE_GENERATION),
            split: seeds::derive_seed(master, seeds::PURPOSE_SPLIT),
            mutation: seeds::derive_seed(master, seeds::PURPOSE_MUTATION),
            init: seeds::derive_seed(master, seeds::PURPOSE_INIT),
            shuffle: seeds::derive_seed(master, seeds::PURPOSE_SHUFFLE),
            forest: seeds::derive_seed(master, seeds::PURPOSE_FOREST),
            logreg: seeds::derive_seed(master, seeds::PURPOSE_LOGREG),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seeds(&self) -> SeedPlan {
        SeedPlan::from_master(self.seed)
    }

    /// Copies the fanned-out seeds into the sub-configs that carry one.
    pub fn resolve_seeds(&mut self) {
        let plan = self.seeds();
        self.generation.rng_seed = plan.generation;
        self.partial_failure.rng_seed = plan.mutation;
    }

    pub fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        self.split.validate()?;
        self.partial_failure.validate()?;
        self.training.validate()?;
        self.threshold.validate()?;
        if self.knn.k == 0 {
            return Err(Error::Config("knn.k must be >= 1".into()));
        }
        if !(self.logreg.c > 0.0) {
            return Err(Error::Config("logreg.c must be > 0".into()));
        }
        if self.forest.n_trees == 0 || self.forest.max_features == Some(0) {
            return Err(Error::Config(
                "forest.n_trees and forest.max_features must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("data")
    }

    pub fn splits_dir(&self) -> PathBuf {
        self.out_dir.join("splits")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_tables_override() {
        let c =
            RunConfig::from_toml("seed = 9\n[generation]\nsamples_per_mode = 3\n[training]\nmax_epochs = 2\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.generation.samples_per_mode, 3);
        assert_eq!(c.generation.laser_pool.len(), 8);
        assert_eq!(c.training.max_epochs, 2);
        assert_eq!(c.training.batch_size, 32);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn seed_fan_out() {
        let mut c = RunConfig::default();
        c.resolve_seeds();
        let plan = c.seeds();
        assert_eq!(c.generation.rng_seed, plan.generation);
        assert_eq!(c.partial_failure.rng_seed, plan.mutation);
        assert_ne!(plan.init, plan.shuffle);
        assert_ne!(SeedPlan::from_master(1), SeedPlan::from_master(2));
    }
}
