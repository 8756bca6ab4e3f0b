//! Config-driven dispatch over the baseline kinds.

use std::path::Path;

use super::external::import_external_predictions;
use super::nbow::nbow_train_eval;
use super::neural::{cnn_baseline_train_eval, cnn_lstm_dnn_train_eval, CnnBaseline, CnnLstmDnnConfig};
use super::spec::{BaselineKind, BaselineSpec};
use crate::config::TrainConfig;
use crate::corpus::{DatasetBundle, Example};
use crate::error::Result;
use crate::evalkit::RunReport;
use crate::lexical::{build_vocabulary, load_embeddings, PorterStemmer};

/// Spec for `kind` from the `[baseline.<kind>]` table of `config`.
pub fn baseline_spec(kind: BaselineKind, config: &TrainConfig) -> Result<BaselineSpec> {
    let overrides = config.baseline.get(kind.as_str()).and_then(toml::Value::as_table);
    BaselineSpec::with_defaults(kind, overrides, config.seed)
}

/// Trains (where applicable) and scores one baseline on `bundle`.
///
/// The averaged-vector lookup vocabulary covers train and test texts: it is
/// a fixed pretrained lookup and no labels enter it. The neural baselines
/// build their vocabulary from train only.
pub fn run_baseline(kind: BaselineKind, bundle: &DatasetBundle, config: &TrainConfig) -> Result<RunReport> {
    let spec = baseline_spec(kind, config)?;
    let metrics = match kind {
        BaselineKind::Nbow => {
            let texts: Vec<Example> = bundle.train().iter().chain(bundle.test()).cloned().collect();
            let vocab = build_vocabulary(&texts)?;
            let table = load_embeddings(&vocab, &config.assets.nbow_vectors, 100, &PorterStemmer, config.seed)?;
            nbow_train_eval(bundle, &vocab, &table, &spec)?
        }
        BaselineKind::Cnn | BaselineKind::CnnLstmDnn => {
            let vocab = build_vocabulary(bundle.train())?;
            let base = config.cnn_config();
            let table = load_embeddings(&vocab, &config.assets.word_vectors, base.embedding_dim, &PorterStemmer, config.seed)?;
            let fit = config.fit_config();
            if kind == BaselineKind::Cnn {
                let cnn = CnnBaseline::config_from_spec(&base, &spec)?;
                cnn_baseline_train_eval(bundle, &table, vocab, &cnn, &fit)?.0
            } else {
                let cfg = CnnLstmDnnConfig::from_spec(&spec, base.max_words)?;
                cnn_lstm_dnn_train_eval(bundle, &table, vocab, &cfg, &fit)?.0
            }
        }
        BaselineKind::External => import_external_predictions(Path::new(&spec.string("predictions")?), bundle)?,
    };
    Ok(RunReport {
        dataset: bundle.name().as_str().to_string(),
        model: kind.as_str().to_string(),
        metrics,
    })
}
