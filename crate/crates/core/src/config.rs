//! The merged, serializable configuration of one pipeline run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augmentation::AugmentConfig;
use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::evaluation::{RobustnessConfig, DEFAULT_THRESHOLD};
use crate::network::TrainConfig;
use crate::transforms::TransformConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub transform: TransformConfig,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub robustness: RobustnessConfig,
    pub threshold: f64,
    pub workers: Option<usize>,
    /// Inputs and outputs of the run, keyed by role.
    pub paths: BTreeMap<String, PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            transform: TransformConfig::default(),
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            robustness: RobustnessConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            workers: None,
            paths: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid_config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Makes `seed` the root of every random stream in the run.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.augment.seed = seed;
        self.train.seed = seed;
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.transform.validate()?;
        self.augment.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        self.robustness.validate()?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid_config(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid_config("workers must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(99);
        cfg.transform.block_size = crate::transforms::BlockSize::Full;
        cfg.paths.insert("data".into(), PathBuf::from("d"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        cfg.save(&path).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap(), cfg);
        assert_eq!(cfg.train.seed, 99);
        assert_eq!(cfg.augment.seed, 99);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 3, "train": {"epochs": 2}}"#).unwrap();
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.batch_size, 24);
        assert_eq!(cfg.robustness, RobustnessConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_values() {
        let cfg = RunConfig {
            threshold: 2.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(
            RunConfig::load(&path),
            Err(Error::InvalidConfig(_))
        ));
    }
}
