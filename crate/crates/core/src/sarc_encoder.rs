//! The trainable sarcasm encoder: domain-adaptive masked-LM pre-training and
//! CLS feature production.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use candle_core::Tensor;
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_atomic, Example};
use crate::error::{Error, Result};
use crate::nn::{read_checkpoint, DropoutRng, EncodedBatch, Encoder, EncoderConfig, MlmHead, Mode, ParamStore, TextTokenizer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlmConfig {
    pub mask_probability: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Subword truncation length for pre-training batches.
    pub max_length: usize,
    /// Pre-train one encoder on all merged corpora rather than one per dataset.
    pub shared: bool,
}

impl Default for MlmConfig {
    fn default() -> Self {
        MlmConfig {
            mask_probability: 0.15,
            epochs: 3,
            learning_rate: 5e-5,
            batch_size: 16,
            seed: 42,
            max_length: 64,
            shared: true,
        }
    }
}

impl MlmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_probability > 0.0 && self.mask_probability < 1.0) {
            return Err(Error::config("mlm.mask_probability", "must lie in (0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::config("mlm.epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("mlm.batch_size", "must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("mlm.learning_rate", "must be positive"));
        }
        if self.max_length < 3 {
            return Err(Error::config("mlm.max_length", "must be at least 3"));
        }
        Ok(())
    }
}

/// A batch after masked-LM corruption.
#[derive(Clone, Debug)]
pub struct MaskedBatch {
    pub input_ids: Vec<Vec<u32>>,
    pub attention_mask: Vec<Vec<u32>>,
    /// Flat `row * seq_len + col` positions of selected tokens.
    pub positions: Vec<u32>,
    /// Original ids at `positions`.
    pub targets: Vec<u32>,
    /// Number of tokens that were candidates for selection.
    pub eligible: usize,
}

impl MaskedBatch {
    pub fn selected(&self) -> usize {
        self.positions.len()
    }
}

/// Selects each non-marker token with probability `p`; a selected token
/// becomes the mask token with probability 0.8, a random non-marker token
/// with probability 0.1, and stays unchanged otherwise.
pub fn mask_tokens(batch: &EncodedBatch, tokenizer: &TextTokenizer, p: f64, rng: &mut ChaCha8Rng) -> Result<MaskedBatch> {
    let mask_id = tokenizer
        .special()
        .mask
        .ok_or_else(|| Error::Tokenizer("masked-LM pre-training needs a mask token".into()))?;
    let vocab = tokenizer.vocab_size() as u32;
    let seq = batch.seq_len();
    let mut out = MaskedBatch {
        input_ids: batch.ids.clone(),
        attention_mask: batch.mask.clone(),
        positions: Vec::new(),
        targets: Vec::new(),
        eligible: 0,
    };
    for (r, row) in out.input_ids.iter_mut().enumerate() {
        for (c, id) in row.iter_mut().enumerate() {
            if tokenizer.is_special(*id) {
                continue;
            }
            out.eligible += 1;
            if rng.gen::<f64>() >= p {
                continue;
            }
            out.positions.push((r * seq + c) as u32);
            out.targets.push(*id);
            let roll: f64 = rng.gen();
            if roll < 0.8 {
                *id = mask_id;
            } else if roll < 0.9 {
                *id = loop {
                    let cand = rng.gen_range(0..vocab);
                    if !tokenizer.is_special(cand) {
                        break cand;
                    }
                };
            }
        }
    }
    Ok(out)
}

/// Encoder whose CLS vector feeds the fused classifier; its parameters live
/// in a shared [`ParamStore`] and are trained with the rest of the model.
#[derive(Clone, Debug)]
pub struct SarcEncoder {
    encoder: Encoder,
    tokenizer: TextTokenizer,
    prefix: String,
}

impl SarcEncoder {
    /// Loads a checkpoint directory into `store` under `prefix` and builds
    /// the encoder body from it. Every body parameter must be present.
    pub fn load_into(dir: &Path, store: &ParamStore, prefix: &str) -> Result<Self> {
        let config = EncoderConfig::read(&dir.join("config.json"))?;
        let tokenizer = TextTokenizer::from_file(&dir.join("tokenizer.json"))?;
        let family = config.family()?;
        let weights = dir.join("model.safetensors");
        if !weights.exists() {
            return Err(Error::load("sarcasm encoder", &weights, "file not found"));
        }
        let body = format!("{}.", family.prefix());
        let tensors = read_checkpoint(&weights, family, store.device())?
            .into_iter()
            .filter(|(k, _)| k.starts_with(&body))
            .map(|(k, t)| (format!("{prefix}.{k}"), t));
        store.insert_tensors(tensors)?;
        let encoder = Encoder::load(&config, store.strict_builder().pp(prefix).pp(family.prefix()))
            .map_err(|e| Error::load("sarcasm encoder", dir, e))?;
        Ok(SarcEncoder {
            encoder,
            tokenizer,
            prefix: prefix.to_string(),
        })
    }

    pub fn tokenizer(&self) -> &TextTokenizer {
        &self.tokenizer
    }

    pub fn config(&self) -> &EncoderConfig {
        self.encoder.config()
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.hidden_size()
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// CLS vectors, shape `(batch, hidden)`.
    pub fn encode(&self, batch: &EncodedBatch, mode: Mode<'_>) -> Result<Tensor> {
        let (ids, mask) = batch.tensors(self.encoder.word_embeddings().device())?;
        self.encoder.cls(&ids, &mask, mode)
    }

    pub fn encode_sarcasm<S: AsRef<str>>(&self, texts: &[S], max_length: usize, mode: Mode<'_>) -> Result<Tensor> {
        self.encode(&self.tokenizer.encode_batch(texts, max_length)?, mode)
    }

    /// Writes `config.json`, `tokenizer.json` and `model.safetensors` with
    /// hub-style parameter names.
    pub fn save(&self, dir: &Path, store: &ParamStore) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("config.json"), serde_json::to_string_pretty(self.config())?.as_bytes())?;
        self.tokenizer.save(&dir.join("tokenizer.json"))?;
        store.save_safetensors(&dir.join("model.safetensors"), &format!("{}.", self.prefix))
    }
}

/// Outcome of a pre-training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlmReport {
    pub checkpoint: PathBuf,
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    /// Tokens selected for prediction and tokens eligible for selection,
    /// summed over all batches.
    pub selected_tokens: usize,
    pub eligible_tokens: usize,
    pub base_checksum: String,
    pub final_checksum: String,
}

impl MlmReport {
    pub fn mask_rate(&self) -> f64 {
        self.selected_tokens as f64 / self.eligible_tokens.max(1) as f64
    }
}

/// Continues masked-LM training of the encoder at `base` on `corpus` and
/// writes the adapted checkpoint to `out`.
pub fn mlm_pretrain(corpus: &[Example], base: &Path, out: &Path, config: &MlmConfig) -> Result<MlmReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus("masked-LM pre-training corpus".into()));
    }
    let enc_config = EncoderConfig::read(&base.join("config.json"))?;
    let tokenizer = TextTokenizer::from_file(&base.join("tokenizer.json"))?;
    let family = enc_config.family()?;
    let weights = base.join("model.safetensors");
    if !weights.exists() {
        return Err(Error::load("base encoder", &weights, "file not found"));
    }
    let store = ParamStore::cpu(config.seed);
    store.insert_tensors(read_checkpoint(&weights, family, store.device())?)?;
    let body_prefix = format!("{}.", family.prefix());
    let base_checksum = store.checksum(&body_prefix)?;
    let encoder = Encoder::load(&enc_config, store.strict_builder().pp(family.prefix()))
        .map_err(|e| Error::load("base encoder", base, e))?;
    let head = MlmHead::load(&enc_config, encoder.word_embeddings(), store.var_builder())?;

    let mut opt = AdamW::new(
        store.vars(),
        ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: 0.01,
            ..Default::default()
        },
    )?;
    let drop_rng = DropoutRng::new(config.seed ^ 0x5eed);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut log = String::from("step\tloss\n");
    let (mut steps, mut selected, mut eligible) = (0usize, 0usize, 0usize);

    for epoch in 0..config.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64)));
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let texts: Vec<&str> = chunk.iter().map(|&i| corpus[i].text.as_str()).collect();
            let batch = tokenizer.encode_batch(&texts, config.max_length)?;
            let masked = mask_tokens(&batch, &tokenizer, config.mask_probability, &mut mask_rng)?;
            eligible += masked.eligible;
            selected += masked.selected();
            if masked.selected() == 0 {
                continue;
            }
            let corrupted = EncodedBatch {
                ids: masked.input_ids.clone(),
                mask: masked.attention_mask.clone(),
            };
            let (ids, attn) = corrupted.tensors(store.device())?;
            let hidden = encoder.forward(&ids, &attn, Mode::Train(&drop_rng))?;
            let (b, t, h) = hidden.dims3()?;
            let positions = Tensor::new(masked.positions.as_slice(), store.device())?;
            let picked = hidden.reshape((b * t, h))?.index_select(&positions, 0)?;
            let logits = head.forward(&picked)?;
            let targets = Tensor::new(masked.targets.as_slice(), store.device())?;
            let loss = candle_nn::loss::cross_entropy(&logits, &targets)?;
            let value = loss.to_scalar::<f32>()? as f64;
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: steps,
                    loss: value,
                });
            }
            opt.backward_step(&loss)?;
            steps += 1;
            sum += value;
            count += 1;
            let _ = writeln!(log, "{steps}\t{value:.6}");
        }
        let mean = if count == 0 { f64::NAN } else { sum / count as f64 };
        log::info!("mlm epoch {} mean loss {mean:.4}", epoch + 1);
        epoch_losses.push(mean);
    }

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join("config.json"), serde_json::to_string_pretty(&enc_config)?.as_bytes())?;
    let tok_bytes = std::fs::read(base.join("tokenizer.json")).map_err(|e| Error::io(base.join("tokenizer.json"), e))?;
    write_atomic(&out.join("tokenizer.json"), &tok_bytes)?;
    store.save_safetensors(&out.join("model.safetensors"), "")?;
    let snapshot = toml::to_string(config).map_err(|e| Error::config("mlm", e.to_string()))?;
    write_atomic(&out.join("mlm_config.toml"), snapshot.as_bytes())?;
    write_atomic(&out.join("loss_log.tsv"), log.as_bytes())?;

    Ok(MlmReport {
        checkpoint: out.to_path_buf(),
        epoch_losses,
        steps,
        selected_tokens: selected,
        eligible_tokens: eligible,
        base_checksum,
        final_checksum: store.checksum(&body_prefix)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::word_level_tokenizer_json;
    use crate::toy;

    #[test]
    fn masking_skips_markers_and_is_seeded() {
        let words = toy::toy_words();
        let tok = TextTokenizer::from_json(&word_level_tokenizer_json(&words)).unwrap();
        let texts = vec!["yeah right i totally love waiting in line"; 40];
        let batch = tok.encode_batch(&texts, 12).unwrap();
        let a = mask_tokens(&batch, &tok, 0.3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = mask_tokens(&batch, &tok, 0.3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.input_ids, b.input_ids);
        let seq = batch.seq_len();
        for &p in &a.positions {
            let (r, c) = (p as usize / seq, p as usize % seq);
            assert!(!tok.is_special(batch.ids[r][c]));
        }
        assert_eq!(a.eligible, 40 * 8);
    }

    #[test]
    fn mask_rate_tracks_probability() {
        let words = toy::toy_words();
        let tok = TextTokenizer::from_json(&word_level_tokenizer_json(&words)).unwrap();
        let texts = vec!["the movie was fun and the plot was good"; 200];
        let batch = tok.encode_batch(&texts, 12).unwrap();
        let m = mask_tokens(&batch, &tok, 0.15, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let rate = m.selected() as f64 / m.eligible as f64;
        assert!((rate - 0.15).abs() < 0.03, "{rate}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = MlmConfig {
            mask_probability: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
