//! Averaged-vector, CNN and CNN-LSTM-DNN baselines on one toy dataset.

use sarcfuse::baselines::{run_baseline, BaselineKind};
use sarcfuse::corpus::DatasetName;
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let assets = toy::write_toy_assets(&dir.path().join("assets"), 8)?;
    let bundle = toy::toy_corpus(DatasetName::IacV2, 120, 40, 8)?;
    let mut config = toy::toy_train_config(&assets, DatasetName::IacV2, dir.path());
    config.baseline = toml::toml! {
        [cnn]
        filters_per_size = 16
        [cnn_lstm_dnn]
        conv_filters = 16
        lstm_hidden = 16
        dense_hidden = 16
    };
    for kind in [BaselineKind::Nbow, BaselineKind::Cnn, BaselineKind::CnnLstmDnn] {
        let report = run_baseline(kind, &bundle, &config)?;
        println!("{:>14}  acc {:.3}  macro f1 {:.3}", kind.as_str(), report.metrics.accuracy, report.metrics.f1_macro);
    }
    Ok(())
}
