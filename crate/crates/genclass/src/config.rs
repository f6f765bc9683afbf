//! `key = value` config files with a closed schema, layered under
//! command-line flags: defaults < config file < flags.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{Precision, SyntheticSpec};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Every key a config file may set.
pub const ALLOWED_KEYS: &[&str] = &[
    // training
    "learning_rate",
    "batch_size",
    "n_dis",
    "lambda",
    "gamma",
    "n_g",
    "d_z",
    "hidden_generator",
    "hidden_critic",
    "hidden_classifier",
    "iterations",
    "seed",
    "precision",
    "log_interval",
    // synthetic data
    "seen_classes",
    "unseen_classes",
    "d_a",
    "d_x",
    "train_per_class",
    "test_per_class",
    "noise_scale",
    // evaluation / baseline
    "mode",
    "samples_per_class",
    "softmax_steps",
    "softmax_learning_rate",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    map: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, path: &Path) -> Result<ConfigFile> {
        let map = crate::data::parse_manifest(text, path)?;
        let unknown: Vec<&str> = map
            .keys()
            .map(String::as_str)
            .filter(|k| !ALLOWED_KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "{}: unknown keys {:?}; allowed keys are {:?}",
                path.display(),
                unknown,
                ALLOWED_KEYS
            )));
        }
        Ok(ConfigFile { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("config key '{key}': cannot parse value '{raw}'"))
            }),
        }
    }

    fn parse_dims(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| {
                        Error::Config(format!(
                            "config key '{key}': invalid width '{s}' in '{raw}'"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Overlays the file's training keys onto `config`.
    pub fn apply_train(&self, config: &mut TrainConfig) -> Result<()> {
        if let Some(v) = self.parse::<f64>("learning_rate")? {
            config.learning_rate = v;
        }
        if let Some(v) = self.parse::<usize>("batch_size")? {
            config.batch_size = v;
        }
        if let Some(v) = self.parse::<usize>("n_dis")? {
            config.n_dis = v;
        }
        if let Some(v) = self.parse::<f64>("lambda")? {
            config.lambda = v;
        }
        if let Some(v) = self.parse::<f64>("gamma")? {
            config.gamma = v;
        }
        if let Some(v) = self.parse::<usize>("n_g")? {
            config.n_g = v;
        }
        if let Some(v) = self.parse::<usize>("d_z")? {
            config.d_z = Some(v);
        }
        if let Some(v) = self.parse_dims("hidden_generator")? {
            config.hidden_generator = v;
        }
        if let Some(v) = self.parse_dims("hidden_critic")? {
            config.hidden_critic = v;
        }
        if let Some(v) = self.parse_dims("hidden_classifier")? {
            config.hidden_classifier = v;
        }
        if let Some(v) = self.parse::<u64>("iterations")? {
            config.iterations = v;
        }
        if let Some(v) = self.parse::<u64>("seed")? {
            config.seed = v;
        }
        if let Some(v) = self.parse::<Precision>("precision")? {
            config.precision = v;
        }
        if let Some(v) = self.parse::<u64>("log_interval")? {
            config.log_interval = v;
        }
        Ok(())
    }

    /// Overlays the file's synthetic-data keys onto `spec`.
    pub fn apply_synth(&self, spec: &mut SyntheticSpec) -> Result<()> {
        if let Some(v) = self.parse::<usize>("seen_classes")? {
            spec.seen_classes = v;
        }
        if let Some(v) = self.parse::<usize>("unseen_classes")? {
            spec.unseen_classes = v;
        }
        if let Some(v) = self.parse::<usize>("d_a")? {
            spec.d_a = v;
        }
        if let Some(v) = self.parse::<usize>("d_x")? {
            spec.d_x = v;
        }
        if let Some(v) = self.parse::<usize>("train_per_class")? {
            spec.train_per_class = v;
        }
        if let Some(v) = self.parse::<usize>("test_per_class")? {
            spec.test_per_class = v;
        }
        if let Some(v) = self.parse::<f64>("noise_scale")? {
            spec.noise_scale = v;
        }
        if let Some(v) = self.parse::<u64>("seed")? {
            spec.seed = v;
        }
        Ok(())
    }
}
