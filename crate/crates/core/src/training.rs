//! Supervised training loop shared by the fused model and the neural
//! baselines.

use candle_core::{DType, Tensor, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Example, Label};
use crate::error::{Error, Result};
use crate::evalkit::score;
use crate::nn::{DropoutRng, Mode, ParamStore, Snapshot};

const EVAL_BATCH: usize = 64;
const DROPOUT_SEED_SALT: u64 = 0xd509_7a11;

/// A binary text classifier with trainable parameters in a [`ParamStore`].
pub trait TextClassifier {
    fn store(&self) -> &ParamStore;

    /// Logits of shape `(batch, 2)`, index 0 non-sarcastic, 1 sarcastic.
    fn logits(&self, texts: &[&str], mode: Mode<'_>) -> Result<Tensor>;

    /// Called once with every text the run will see, before training.
    fn prepare(&self, _texts: &[&str]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub val_fraction: f64,
    pub class_weighting: bool,
    /// Stop after this many optimizer steps, mid-epoch if needed.
    pub max_steps: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_epochs: 10,
            learning_rate: 1e-5,
            batch_size: 8,
            weight_decay: 0.01,
            seed: 42,
            val_fraction: 0.1,
            class_weighting: false,
            max_steps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training batches as they were optimized.
    pub train_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_f1_macro: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub steps: usize,
    pub fit_examples: usize,
    pub val_examples: usize,
}

/// Seeded shuffle of `examples`, split so the last `fraction` (rounded down)
/// becomes the validation part.
pub fn holdout_split(examples: &[Example], fraction: f64, seed: u64) -> (Vec<Example>, Vec<Example>) {
    let mut shuffled = examples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((examples.len() as f64) * fraction).floor() as usize;
    let val = shuffled.split_off(examples.len() - n_val);
    (shuffled, val)
}

/// Per-class weights `n / (2 · count)`; classes absent from `labels` get 1.
pub fn class_weights(labels: &[Label]) -> [f64; 2] {
    let mut counts = [0usize; 2];
    for l in labels {
        counts[l.index()] += 1;
    }
    let n = labels.len() as f64;
    counts.map(|c| if c == 0 { 1.0 } else { n / (2.0 * c as f64) })
}

/// Cross-entropy, averaged with per-example weights.
pub fn weighted_cross_entropy(logits: &Tensor, labels: &[Label], weights: [f64; 2]) -> Result<Tensor> {
    let dev = logits.device();
    let n = labels.len();
    let mut onehot = vec![0f32; n * 2];
    let mut w = vec![0f32; n];
    for (i, l) in labels.iter().enumerate() {
        onehot[i * 2 + l.index()] = 1.0;
        w[i] = weights[l.index()] as f32;
    }
    let dtype = logits.dtype();
    let onehot = Tensor::from_vec(onehot, (n, 2), dev)?.to_dtype(dtype)?;
    let w = Tensor::from_vec(w, n, dev)?.to_dtype(dtype)?;
    let total = w.sum_all()?;
    let logp = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    let picked = (logp * onehot)?.sum(1)?;
    Ok(picked.mul(&w)?.sum_all()?.neg()?.broadcast_div(&total)?)
}

fn argmax_rows(logits: &Tensor) -> Result<Vec<Label>> {
    let idx = logits.argmax(D::Minus1)?.to_vec1::<u32>()?;
    Ok(idx.into_iter().map(|i| Label::from_index(i as usize).expect("binary logits")).collect())
}

/// Class probabilities in inference mode, in input order.
pub fn predict_probs<M: TextClassifier + ?Sized>(model: &M, texts: &[&str]) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EVAL_BATCH) {
        let logits = model.logits(chunk, Mode::Eval)?;
        let probs = candle_nn::ops::softmax(&logits.to_dtype(DType::F64)?, D::Minus1)?.to_vec2::<f64>()?;
        out.extend(probs.into_iter().map(|p| [p[0], p[1]]));
    }
    Ok(out)
}

pub fn predict_labels<M: TextClassifier + ?Sized>(model: &M, texts: &[&str]) -> Result<Vec<Label>> {
    let mut out = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EVAL_BATCH) {
        out.extend(argmax_rows(&model.logits(chunk, Mode::Eval)?)?);
    }
    Ok(out)
}

/// Trains `model` on `train` with AdamW and cross-entropy, shuffling each
/// epoch with a seed derived from `config.seed`. When a validation part is
/// held out, the parameters of the epoch with the best validation macro F1
/// are restored at the end.
pub fn fit<M: TextClassifier + ?Sized>(model: &M, train: &[Example], config: &FitConfig) -> Result<FitOutcome> {
    if train.is_empty() {
        return Err(Error::EmptyCorpus("training split".into()));
    }
    if config.batch_size == 0 || config.max_epochs == 0 {
        return Err(Error::config("batch_size", "batch size and epochs must be positive"));
    }
    let (fit_set, val_set) = holdout_split(train, config.val_fraction, config.seed);
    if fit_set.is_empty() {
        return Err(Error::EmptyCorpus("training split after validation holdout".into()));
    }
    let all_texts: Vec<&str> = fit_set.iter().chain(&val_set).map(|e| e.text.as_str()).collect();
    model.prepare(&all_texts)?;
    let val_texts: Vec<&str> = val_set.iter().map(|e| e.text.as_str()).collect();
    let val_gold: Vec<Label> = val_set.iter().map(|e| e.label).collect();
    let weights = if config.class_weighting {
        class_weights(&fit_set.iter().map(|e| e.label).collect::<Vec<_>>())
    } else {
        [1.0, 1.0]
    };

    let store = model.store();
    let mut opt = AdamW::new(
        store.vars(),
        ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: config.weight_decay,
            ..Default::default()
        },
    )?;
    let drop_rng = DropoutRng::new(config.seed ^ DROPOUT_SEED_SALT);
    let mut order: Vec<usize> = (0..fit_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Snapshot)> = None;
    let mut steps = 0usize;

    'epochs: for epoch in 1..=config.max_epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1_000_003 * epoch as u64)));
        let (mut loss_sum, mut batches, mut correct, mut seen) = (0.0, 0usize, 0usize, 0usize);
        let mut stop = false;
        for chunk in order.chunks(config.batch_size) {
            let texts: Vec<&str> = chunk.iter().map(|&i| fit_set[i].text.as_str()).collect();
            let labels: Vec<Label> = chunk.iter().map(|&i| fit_set[i].label).collect();
            let logits = model.logits(&texts, Mode::Train(&drop_rng))?;
            let loss = weighted_cross_entropy(&logits, &labels, weights)?;
            let value = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: steps,
                    loss: value,
                });
            }
            opt.backward_step(&loss)?;
            steps += 1;
            loss_sum += value;
            batches += 1;
            correct += argmax_rows(&logits)?.iter().zip(&labels).filter(|(p, g)| p == g).count();
            seen += labels.len();
            if config.max_steps.is_some_and(|m| steps >= m) {
                stop = true;
                break;
            }
        }
        let val_f1 = if val_set.is_empty() {
            None
        } else {
            Some(score(&predict_labels(model, &val_texts)?, &val_gold)?.f1_macro)
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.3} val f1 {:?}",
            loss_sum / batches as f64,
            correct as f64 / seen as f64,
            val_f1
        );
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_f1_macro: val_f1,
        });
        if let Some(f1) = val_f1 {
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, epoch, store.snapshot()?));
            }
        }
        if stop {
            break 'epochs;
        }
    }

    let last_epoch = history.last().map_or(0, |r| r.epoch);
    let best_epoch = match best {
        Some((_, epoch, snapshot)) => {
            store.restore(&snapshot)?;
            epoch
        }
        None => last_epoch,
    };
    Ok(FitOutcome {
        history,
        best_epoch,
        steps,
        fit_examples: fit_set.len(),
        val_examples: val_set.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DatasetName, Split};
    use candle_core::Device;

    fn examples(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                id: format!("e{i}"),
                text: format!("text {i}"),
                label: Label::from_index(i % 2).unwrap(),
                dataset: DatasetName::SarcMovies,
                split: Split::Train,
            })
            .collect()
    }

    #[test]
    fn holdout_takes_last_tenth_of_seeded_shuffle() {
        let xs = examples(32);
        let (fit, val) = holdout_split(&xs, 0.1, 5);
        assert_eq!((fit.len(), val.len()), (29, 3));
        let (fit2, val2) = holdout_split(&xs, 0.1, 5);
        assert_eq!(fit, fit2);
        assert_eq!(val, val2);
        assert!(val.iter().all(|v| !fit.contains(v)));
    }

    #[test]
    fn unweighted_loss_matches_closed_form() {
        let dev = Device::Cpu;
        let logits = Tensor::new(&[[0.0f64, 1.0], [2.0, 0.0]], &dev).unwrap();
        let loss = weighted_cross_entropy(&logits, &[Label::Sarcastic, Label::Sarcastic], [1.0, 1.0])
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        let lse = |a: f64, b: f64| (a.exp() + b.exp()).ln();
        let expected = ((lse(0.0, 1.0) - 1.0) + (lse(2.0, 0.0) - 0.0)) / 2.0;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn class_weights_balance_counts() {
        let w = class_weights(&[Label::Sarcastic, Label::Sarcastic, Label::Sarcastic, Label::NonSarcastic]);
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
