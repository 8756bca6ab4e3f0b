//! Trainable neural baselines: a CNN classifier and a CNN-LSTM-DNN stack.

use candle_core::{DType, Module, Tensor};
use candle_nn::rnn::{LSTMConfig, LSTM, RNN};
use candle_nn::{Embedding, Linear};

use super::spec::BaselineSpec;
use crate::cnn_branch::{CnnBranch, CnnConfig};
use crate::corpus::{DatasetBundle, Label};
use crate::error::{Error, Result};
use crate::evalkit::{score, MetricsReport};
use crate::lexical::{encode_for_cnn, EmbeddingTable, Vocabulary, PAD_INDEX};
use crate::nn::{dropout, Conv1d, Mode, ParamStore};
use crate::training::{fit, predict_labels, FitConfig, FitOutcome, TextClassifier};

/// CNN branch followed directly by a linear layer to two classes.
pub struct CnnBaseline {
    store: ParamStore,
    cnn: CnnBranch,
    out: Linear,
    vocab: Vocabulary,
}

impl CnnBaseline {
    pub fn new(table: &EmbeddingTable, vocab: Vocabulary, config: &CnnConfig, seed: u64) -> Result<Self> {
        let store = ParamStore::cpu(seed);
        let cnn = CnnBranch::with_embeddings(table, config, &store, "cnn")?;
        let out = candle_nn::linear(cnn.output_dim(), 2, store.var_builder().pp("out"))?;
        Ok(CnnBaseline { store, cnn, out, vocab })
    }

    /// Overrides filter settings of `base` with the spec's values.
    pub fn config_from_spec(base: &CnnConfig, spec: &BaselineSpec) -> Result<CnnConfig> {
        let cfg = CnnConfig {
            filter_sizes: spec.usize_list("filter_sizes")?,
            filters_per_size: spec.usize("filters_per_size")?,
            dropout_rate: spec.f64("dropout_rate")?,
            ..base.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl TextClassifier for CnnBaseline {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn logits(&self, texts: &[&str], mode: Mode<'_>) -> Result<Tensor> {
        let w = self.cnn.config().max_words;
        let idx: Vec<Vec<u32>> = texts.iter().map(|t| encode_for_cnn(t, &self.vocab, w)).collect();
        let c = dropout(&self.cnn.cnn_forward(&idx)?, self.cnn.config().dropout_rate, mode)?;
        Ok(self.out.forward(&c)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnLstmDnnConfig {
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub lstm_hidden: usize,
    pub dense_hidden: usize,
    pub dropout_rate: f64,
    pub max_words: usize,
}

impl CnnLstmDnnConfig {
    pub fn from_spec(spec: &BaselineSpec, max_words: usize) -> Result<Self> {
        let cfg = CnnLstmDnnConfig {
            conv_filters: spec.usize("conv_filters")?,
            conv_kernel: spec.usize("conv_kernel")?,
            lstm_hidden: spec.usize("lstm_hidden")?,
            dense_hidden: spec.usize("dense_hidden")?,
            dropout_rate: spec.f64("dropout_rate")?,
            max_words,
        };
        if !(0.0..1.0).contains(&cfg.dropout_rate) {
            return Err(Error::config("baseline.cnn_lstm_dnn.dropout_rate", "must lie in [0, 1)"));
        }
        Ok(cfg)
    }
}

/// Two length-preserving convolutions, two stacked LSTMs read at the last
/// real token, then a dense layer and a two-way output.
pub struct CnnLstmDnn {
    store: ParamStore,
    embedding: Embedding,
    convs: [Conv1d; 2],
    lstms: [LSTM; 2],
    dense: Linear,
    out: Linear,
    vocab: Vocabulary,
    config: CnnLstmDnnConfig,
}

impl CnnLstmDnn {
    pub fn new(table: &EmbeddingTable, vocab: Vocabulary, config: &CnnLstmDnnConfig, seed: u64) -> Result<Self> {
        let store = ParamStore::cpu(seed);
        let weight = Tensor::from_slice(table.data(), (table.rows(), table.dim()), store.device())?;
        store.insert_tensors([("embedding.weight".to_string(), weight)])?;
        let vb = store.var_builder();
        let embedding = Embedding::new(vb.get((table.rows(), table.dim()), "embedding.weight")?, table.dim());
        let (f, k) = (config.conv_filters, config.conv_kernel);
        let conv0 = Conv1d::load(table.dim(), f, k, k / 2, vb.pp("conv0"))?;
        let conv1 = Conv1d::load(f, f, k, k / 2, vb.pp("conv1"))?;
        let h = config.lstm_hidden;
        let lstm0 = candle_nn::lstm(f, h, LSTMConfig::default(), vb.pp("lstm"))?;
        let lstm1 = candle_nn::lstm(
            h,
            h,
            LSTMConfig {
                layer_idx: 1,
                ..Default::default()
            },
            vb.pp("lstm"),
        )?;
        let dense = candle_nn::linear(h, config.dense_hidden, vb.pp("dense"))?;
        let out = candle_nn::linear(config.dense_hidden, 2, vb.pp("out"))?;
        Ok(CnnLstmDnn {
            store,
            embedding,
            convs: [conv0, conv1],
            lstms: [lstm0, lstm1],
            dense,
            out,
            vocab,
            config: config.clone(),
        })
    }

    /// Logits for already-encoded rows of `max_words` indices.
    pub fn forward_indices(&self, rows: &[Vec<u32>], mode: Mode<'_>) -> Result<Tensor> {
        let (b, t) = (rows.len(), rows.first().map_or(0, Vec::len));
        let dev = self.store.device();
        let idx = Tensor::from_vec(rows.concat(), (b, t), dev)?;
        let mut x = self.embedding.forward(&idx)?.transpose(1, 2)?.contiguous()?;
        for conv in &self.convs {
            x = conv.forward(&x)?.relu()?;
            // even kernels grow the sequence by one
            x = x.narrow(2, 0, t)?.contiguous()?;
        }
        let mut seq = x.transpose(1, 2)?.contiguous()?;
        for lstm in &self.lstms {
            let states = lstm.seq(&seq)?;
            seq = lstm.states_to_tensor(&states)?;
        }
        // one-hot pick of the last non-pad position (position 0 if all pad)
        let mut pick = vec![0f32; b * t];
        for (r, row) in rows.iter().enumerate() {
            let len = row.iter().filter(|&&i| i as usize != PAD_INDEX).count().max(1);
            pick[r * t + len.min(t) - 1] = 1.0;
        }
        let pick = Tensor::from_vec(pick, (b, t, 1), dev)?.to_dtype(seq.dtype())?;
        let last = seq.broadcast_mul(&pick)?.sum(1)?;
        let h = self.dense.forward(&last)?.relu()?;
        let h = dropout(&h, self.config.dropout_rate, mode)?;
        Ok(self.out.forward(&h)?)
    }
}

impl TextClassifier for CnnLstmDnn {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn logits(&self, texts: &[&str], mode: Mode<'_>) -> Result<Tensor> {
        let rows: Vec<Vec<u32>> = texts
            .iter()
            .map(|t| encode_for_cnn(t, &self.vocab, self.config.max_words))
            .collect();
        Ok(self.forward_indices(&rows, mode)?.to_dtype(DType::F32)?)
    }
}

/// Trains on the train split and scores the test split.
pub fn train_eval<M: TextClassifier>(model: &M, bundle: &DatasetBundle, fit_config: &FitConfig) -> Result<(MetricsReport, FitOutcome)> {
    let outcome = fit(model, bundle.train(), fit_config)?;
    let test = bundle.test();
    let texts: Vec<&str> = test.iter().map(|e| e.text.as_str()).collect();
    let gold: Vec<Label> = test.iter().map(|e| e.label).collect();
    let report = score(&predict_labels(model, &texts)?, &gold)?;
    Ok((report, outcome))
}

pub fn cnn_baseline_train_eval(
    bundle: &DatasetBundle,
    table: &EmbeddingTable,
    vocab: Vocabulary,
    config: &CnnConfig,
    fit_config: &FitConfig,
) -> Result<(MetricsReport, FitOutcome)> {
    let model = CnnBaseline::new(table, vocab, config, fit_config.seed)?;
    train_eval(&model, bundle, fit_config)
}

pub fn cnn_lstm_dnn_train_eval(
    bundle: &DatasetBundle,
    table: &EmbeddingTable,
    vocab: Vocabulary,
    config: &CnnLstmDnnConfig,
    fit_config: &FitConfig,
) -> Result<(MetricsReport, FitOutcome)> {
    let model = CnnLstmDnn::new(table, vocab, config, fit_config.seed)?;
    train_eval(&model, bundle, fit_config)
}
