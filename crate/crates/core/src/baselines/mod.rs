//! Baselines under the shared data and evaluation pipeline.

mod external;
mod nbow;
mod neural;
mod runner;
mod spec;

pub use external::import_external_predictions;
pub use nbow::{nbow_train_eval, sentence_vector, LogisticRegression};
pub use neural::{
    cnn_baseline_train_eval, cnn_lstm_dnn_train_eval, train_eval, CnnBaseline, CnnLstmDnn, CnnLstmDnnConfig,
};
pub use spec::{BaselineKind, BaselineSpec};
pub use runner::{baseline_spec, run_baseline};
