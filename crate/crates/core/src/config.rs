//! Run configuration.
//!
//! A run is described by one TOML file. Keys left out take the per-dataset
//! defaults of [`TrainConfig::for_dataset`]; unknown keys are rejected with
//! their full path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cnn_branch::CnnConfig;
use crate::corpus::DatasetName;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::sarc_encoder::MlmConfig;
use crate::training::FitConfig;

/// Locations of pretrained assets. Relative paths resolve against the
/// working directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetPaths {
    /// Checkpoint directory of the trainable encoder (base or MLM-adapted).
    pub sarc_encoder: PathBuf,
    pub emotion: PathBuf,
    pub sentiment: PathBuf,
    /// 300-dimensional word vectors for the CNN branch.
    pub word_vectors: PathBuf,
    /// 100-dimensional word vectors for the averaged-vector baseline.
    pub nbow_vectors: PathBuf,
}

impl Default for AssetPaths {
    fn default() -> Self {
        AssetPaths {
            sarc_encoder: "assets/sarc_encoder".into(),
            emotion: "assets/emotion".into(),
            sentiment: "assets/sentiment".into(),
            word_vectors: "assets/glove.42B.300d.txt".into(),
            nbow_vectors: "assets/glove.6B.100d.txt".into(),
        }
    }
}

/// CNN branch settings as written in a config file; `max_words` defaults to
/// twice the transformer `max_length`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnSettings {
    pub filter_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub dropout_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_words: Option<usize>,
}

impl Default for CnnSettings {
    fn default() -> Self {
        let c = CnnConfig::default();
        CnnSettings {
            filter_sizes: c.filter_sizes,
            filters_per_size: c.filters_per_size,
            dropout_rate: c.dropout_rate,
            max_words: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetName,
    /// Canonical dataset directory (`train.jsonl`, `test.jsonl`, `manifest.json`).
    pub data_dir: PathBuf,
    pub seed: u64,
    pub max_length: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Fraction of train held out for best-epoch selection.
    pub val_fraction: f64,
    pub class_weighting: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub assets: AssetPaths,
    pub cnn: CnnSettings,
    pub fusion: FusionConfig,
    pub mlm: MlmConfig,
    /// Hyperparameter overrides for baseline runs, keyed as in
    /// [`crate::baselines::BaselineSpec`].
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub baseline: toml::Table,
}

impl TrainConfig {
    /// Best-performing settings per dataset.
    pub fn for_dataset(dataset: DatasetName) -> TrainConfig {
        let (max_length, max_epochs, batch_size) = match dataset {
            DatasetName::SarcMovies => (18, 12, 8),
            DatasetName::SarcTechnology => (14, 30, 4),
            DatasetName::IacV2 => (16, 20, 32),
            DatasetName::Twitter => (16, 20, 32),
        };
        TrainConfig {
            dataset,
            data_dir: PathBuf::from("data").join(dataset.as_str()),
            seed: 42,
            max_length,
            max_epochs,
            learning_rate: 1e-5,
            batch_size,
            weight_decay: 0.01,
            val_fraction: 0.1,
            class_weighting: false,
            cache_dir: None,
            assets: AssetPaths::default(),
            cnn: CnnSettings::default(),
            fusion: FusionConfig::default(),
            mlm: MlmConfig::default(),
            baseline: toml::Table::new(),
        }
    }

    /// Parses a config file body; `overrides` are `dotted.key=value` pairs
    /// applied on top. Values parse as TOML scalars or arrays and fall back
    /// to plain strings.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<TrainConfig> {
        let user: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        let mut user = toml::Value::Table(user);
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| Error::config(ov.as_str(), "override must be key=value"))?;
            set_path(&mut user, key.trim(), parse_scalar(raw.trim()))?;
        }
        let dataset: DatasetName = match user.get("dataset") {
            Some(toml::Value::String(s)) => s.parse().map_err(|_| Error::config("dataset", format!("unknown dataset `{s}`")))?,
            Some(_) => return Err(Error::config("dataset", "must be a string")),
            None => return Err(Error::config("dataset", "missing required key")),
        };
        let mut merged = toml::Value::try_from(TrainConfig::for_dataset(dataset))
            .map_err(|e| Error::config("<defaults>", e.to_string()))?;
        merge(&mut merged, user);
        let cfg: TrainConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<serialize>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| {
            if v == 0 {
                Err(Error::config(key, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("max_epochs", self.max_epochs)?;
        positive("batch_size", self.batch_size)?;
        if self.max_length < 3 {
            return Err(Error::config("max_length", "must be at least 3"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::config("val_fraction", "must lie in [0, 1)"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        self.cnn_config().validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("cnn.{key}"), message),
            other => other,
        })?;
        self.fusion.validate()?;
        self.mlm.validate()?;
        Ok(())
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            filter_sizes: self.cnn.filter_sizes.clone(),
            filters_per_size: self.cnn.filters_per_size,
            embedding_dim: CnnConfig::default().embedding_dim,
            max_words: self.cnn.max_words.unwrap_or(2 * self.max_length),
            dropout_rate: self.cnn.dropout_rate,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_epochs: self.max_epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            seed: self.seed,
            val_fraction: self.val_fraction,
            class_weighting: self.class_weighting,
            max_steps: None,
        }
    }

    /// Cache directory, with `SARCFUSE_CACHE_DIR` taking precedence.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| self.cache_dir.clone())
    }
}

/// Environment variable overriding the feature cache directory.
pub const CACHE_DIR_ENV: &str = "SARCFUSE_CACHE_DIR";

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::config(key, "path crosses a non-table value"))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::config(key, "path crosses a non-table value"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
