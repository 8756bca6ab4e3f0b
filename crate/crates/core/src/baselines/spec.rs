use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Nbow,
    Cnn,
    CnnLstmDnn,
    External,
}

impl BaselineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Nbow => "nbow",
            BaselineKind::Cnn => "cnn",
            BaselineKind::CnnLstmDnn => "cnn_lstm_dnn",
            BaselineKind::External => "external",
        }
    }

    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            BaselineKind::Nbow => &["l2_strength", "tolerance", "max_iterations"],
            BaselineKind::Cnn => &["filter_sizes", "filters_per_size", "dropout_rate"],
            BaselineKind::CnnLstmDnn => &["conv_filters", "conv_kernel", "lstm_hidden", "dense_hidden", "dropout_rate"],
            BaselineKind::External => &["predictions"],
        }
    }

    fn defaults(self) -> toml::Table {
        let text = match self {
            BaselineKind::Nbow => "l2_strength = 1.0\ntolerance = 1e-6\nmax_iterations = 100",
            BaselineKind::Cnn => "filter_sizes = [3, 4, 5]\nfilters_per_size = 100\ndropout_rate = 0.5",
            BaselineKind::CnnLstmDnn => {
                "conv_filters = 64\nconv_kernel = 3\nlstm_hidden = 128\ndense_hidden = 128\ndropout_rate = 0.25"
            }
            BaselineKind::External => "",
        };
        text.parse().expect("built-in defaults parse")
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbow" => Ok(BaselineKind::Nbow),
            "cnn" => Ok(BaselineKind::Cnn),
            "cnn_lstm_dnn" | "cnn-lstm-dnn" => Ok(BaselineKind::CnnLstmDnn),
            "external" => Ok(BaselineKind::External),
            other => Err(Error::config("kind", format!("unknown baseline `{other}`"))),
        }
    }
}

/// A baseline and its hyperparameters; the kind's required keys are checked
/// on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    pub hyperparameters: toml::Table,
    pub seed: u64,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind, hyperparameters: toml::Table, seed: u64) -> Result<Self> {
        if let Some(missing) = kind.required_keys().iter().find(|k| !hyperparameters.contains_key(**k)) {
            return Err(Error::config(format!("baseline.{kind}.{missing}"), "required key missing"));
        }
        Ok(BaselineSpec {
            kind,
            hyperparameters,
            seed,
        })
    }

    /// Built-in defaults overlaid with `overrides`.
    pub fn with_defaults(kind: BaselineKind, overrides: Option<&toml::Table>, seed: u64) -> Result<Self> {
        let mut hp = kind.defaults();
        if let Some(o) = overrides {
            for (k, v) in o {
                hp.insert(k.clone(), v.clone());
            }
        }
        BaselineSpec::new(kind, hp, seed)
    }

    fn get(&self, key: &str) -> Result<&toml::Value> {
        self.hyperparameters
            .get(key)
            .ok_or_else(|| Error::config(format!("baseline.{}.{key}", self.kind), "required key missing"))
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        Error::config(format!("baseline.{}.{key}", self.kind), format!("must be {what}"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            toml::Value::Float(v) => Ok(*v),
            toml::Value::Integer(v) => Ok(*v as f64),
            _ => Err(self.bad(key, "a number")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key)? {
            toml::Value::Integer(v) if *v > 0 => Ok(*v as usize),
            _ => Err(self.bad(key, "a positive integer")),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        match self.get(key)? {
            toml::Value::Array(xs) => xs
                .iter()
                .map(|x| match x {
                    toml::Value::Integer(v) if *v > 0 => Ok(*v as usize),
                    _ => Err(self.bad(key, "a list of positive integers")),
                })
                .collect(),
            _ => Err(self.bad(key, "a list of positive integers")),
        }
    }

    pub fn string(&self, key: &str) -> Result<String> {
        match self.get(key)? {
            toml::Value::String(s) => Ok(s.clone()),
            _ => Err(self.bad(key, "a string")),
        }
    }
}
