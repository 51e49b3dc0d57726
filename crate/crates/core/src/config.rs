//! Run configuration: one JSON document describing a full experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{ModelKind, TrainConfig};
use crate::dataset::{generate_reference, load_delimited, Dataset, LoadOptions, Schema};
use crate::error::{Error, Result};
use crate::evaluate::{SortKey, SplitPlan};
use crate::faultgen::InjectionSpec;
use crate::preprocess::PreprocessPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// The reference generator; its seed is the run seed.
    Generate { n: usize, defect_fraction: f64 },
    File {
        path: PathBuf,
        /// Schema JSON; the reference schema when absent.
        #[serde(default)]
        schema: Option<PathBuf>,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default)]
        missing_token: String,
    },
}

fn default_delimiter() -> char {
    ','
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Generate {
            n: 1000,
            defect_fraction: 0.10,
        }
    }
}

fn default_seed() -> u64 {
    7
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_algorithms() -> Vec<ModelKind> {
    ModelKind::COMPARISON.to_vec()
}

fn default_rules_from() -> ModelKind {
    ModelKind::C5
}

/// A run is a pure function of this config and its input files.
///
/// `seed` is the only seed: it drives the generator, injection, splits and
/// model initialization, overriding any seed inside the sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default)]
    pub preprocess: PreprocessPlan,
    #[serde(default)]
    pub injection: Option<InjectionSpec>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<ModelKind>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitPlan,
    /// Tree kind whose rules `compare` exports.
    #[serde(default = "default_rules_from")]
    pub rules_from: ModelKind,
    #[serde(default)]
    pub sort: SortKey,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::reference()
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

impl RunConfig {
    /// 1000 generated parts, 10% defective, seed 7, the seven compared kinds.
    pub fn reference() -> Self {
        RunConfig {
            seed: default_seed(),
            out_dir: default_out(),
            dataset: DatasetSource::default(),
            preprocess: PreprocessPlan::default(),
            injection: None,
            algorithms: default_algorithms(),
            train: TrainConfig::default(),
            split: SplitPlan::default(),
            rules_from: default_rules_from(),
            sort: SortKey::Input,
        }
        .with_seed(default_seed())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_err(&key, e.into_inner().to_string())
        })?;
        let seed = config.seed;
        let config = config.with_seed(seed);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets the run seed and propagates it to every seeded section.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.split.seed = seed;
        if let Some(inj) = &mut self.injection {
            inj.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Generate { n, defect_fraction } = &self.dataset {
            if *n < 10 {
                return Err(config_err("dataset.n", "must be at least 10"));
            }
            if !(0.0..=1.0).contains(defect_fraction) {
                return Err(config_err("dataset.defect_fraction", "must be in [0, 1]"));
            }
        }
        if self.preprocess.bins < 2 {
            return Err(config_err("preprocess.bins", "must be at least 2"));
        }
        if let Some(inj) = &self.injection {
            inj.validate().map_err(|e| config_err("injection", e.to_string()))?;
        }
        self.train.validate()?;
        self.split
            .validate()
            .map_err(|e| config_err("split", e.to_string()))?;
        if !self.rules_from.is_tree() {
            return Err(config_err("rules_from", format!("{} is not a tree kind", self.rules_from)));
        }
        Ok(())
    }

    /// Errors unless at least one algorithm is listed.
    pub fn require_algorithms(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(config_err("algorithms", "at least one algorithm is required"));
        }
        Ok(())
    }

    /// Schema of the configured source.
    pub fn schema(&self) -> Result<Schema> {
        match &self.dataset {
            DatasetSource::File {
                schema: Some(path), ..
            } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Schema::from_json(&text)
            }
            _ => Ok(Schema::reference()),
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        match &self.dataset {
            DatasetSource::File {
                delimiter,
                missing_token,
                ..
            } => LoadOptions {
                delimiter: *delimiter as u8,
                missing_token: missing_token.clone(),
            },
            DatasetSource::Generate { .. } => LoadOptions::default(),
        }
    }

    /// The dataset before injection.
    pub fn base_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Generate { n, defect_fraction } => {
                generate_reference(*n, *defect_fraction, self.seed)
            }
            DatasetSource::File { path, .. } => {
                load_delimited(path, &self.schema()?, &self.load_options())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let c = RunConfig::reference();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(c.train.seed, 7);
        assert_eq!(c.algorithms.len(), 7);
    }

    #[test]
    fn empty_object_is_reference() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::reference());
    }

    #[test]
    fn errors_name_the_key() {
        let err = RunConfig::from_json(r#"{"split": {"test_fraction": "big"}}"#).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "split.test_fraction"),
            other => panic!("{other}"),
        }
        let err = RunConfig::from_json(r#"{"algorithms": ["cart", "forest"]}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "algorithms[1]"), "{err}");
        let err = RunConfig::from_json(r#"{"unknown": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        let err = RunConfig::from_json(r#"{"rules_from": "svm"}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "rules_from"));
    }

    #[test]
    fn seed_propagates() {
        let c = RunConfig::from_json(r#"{"seed": 3, "train": {"seed": 99}, "injection": {"fraction": 0.1}}"#).unwrap();
        assert_eq!(c.train.seed, 3);
        assert_eq!(c.split.seed, 3);
        assert_eq!(c.injection.unwrap().seed, 3);
    }
}
