//! Small seeded stand-ins for the pretrained assets and datasets.
//!
//! Everything here is written through the same file formats the real assets
//! use (hub-style checkpoint directories, whitespace vector files, canonical
//! JSONL datasets), so the production loaders are what reads them back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::cnn_branch::CnnConfig;
use crate::config::{AssetPaths, CnnSettings, TrainConfig};
use crate::corpus::{write_atomic, DatasetBundle, DatasetName, Example, Label, Split};
use crate::error::Result;
use crate::extractors::{EMOTION_LABELS, SENTIMENT_LABELS};
use crate::fusion::FusionConfig;
use crate::nn::{word_level_tokenizer_json, ClassifierHead, Encoder, EncoderConfig, MlmHead, ParamStore};
use crate::sarc_encoder::MlmConfig;

/// GoEmotions label names in model output order.
pub const GOEMOTIONS_LABELS: [&str; EMOTION_LABELS] = [
    "admiration", "amusement", "anger", "annoyance", "approval", "caring", "confusion", "curiosity",
    "desire", "disappointment", "disapproval", "disgust", "embarrassment", "excitement", "fear",
    "gratitude", "grief", "joy", "love", "nervousness", "optimism", "pride", "realization", "relief",
    "remorse", "sadness", "surprise", "neutral",
];

const SARCASTIC_TEMPLATES: &[&str] = &[
    "oh great another {noun} , just what i needed",
    "yeah right i totally love {gerund} all day",
    "wow what a {adj} {noun} , so thrilled",
    "sure because {gerund} is always so fun",
    "oh joy the {noun} broke again , perfect",
    "i just love how the {noun} never works",
];

const PLAIN_TEMPLATES: &[&str] = &[
    "the {noun} was {adj} and worked well",
    "i enjoyed the {noun} today with friends",
    "this {noun} is {adj} for the price",
    "we spent the evening {gerund} at home",
    "the new {noun} arrived on time",
    "my sister recommended the {noun} to me",
];

const NOUNS: &[&str] = &["movie", "phone", "laptop", "update", "meeting", "plot", "game", "train", "battery", "show"];
const ADJS: &[&str] = &["good", "nice", "solid", "cheap", "quiet", "fast", "long", "decent"];
const GERUNDS: &[&str] = &["waiting", "running", "working", "reading", "cooking", "watching"];

/// Inflected words whose vectors are written only under their stem.
const STEM_ONLY: &[(&str, &str)] = &[("running", "run"), ("waiting", "wait"), ("working", "work")];

/// Words deliberately absent from the vector files.
const NO_VECTOR: &[&str] = &["thrilled", "sister"];

/// Every word the toy corpus can produce, sorted and deduplicated.
pub fn toy_words() -> Vec<String> {
    let mut words: Vec<String> = SARCASTIC_TEMPLATES
        .iter()
        .chain(PLAIN_TEMPLATES)
        .flat_map(|t| t.split_whitespace())
        .filter(|w| !w.starts_with('{'))
        .chain(NOUNS.iter().chain(ADJS).chain(GERUNDS).copied())
        .chain(["not", "so", "a", "is", "day", "fine", "what", "yeah", "right"])
        .map(str::to_string)
        .collect();
    words.sort();
    words.dedup();
    words
}

fn fill(template: &str, rng: &mut ChaCha8Rng) -> String {
    template
        .split_whitespace()
        .map(|w| match w {
            "{noun}" => NOUNS.choose(rng).copied().unwrap_or("movie"),
            "{adj}" => ADJS.choose(rng).copied().unwrap_or("good"),
            "{gerund}" => GERUNDS.choose(rng).copied().unwrap_or("waiting"),
            other => other,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// A balanced dataset whose sarcastic texts carry cue phrases.
pub fn toy_corpus(name: DatasetName, n_train: usize, n_test: usize, seed: u64) -> Result<DatasetBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |split: Split, n: usize| -> Vec<Example> {
        (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Sarcastic } else { Label::NonSarcastic };
                let templates = if label == Label::Sarcastic { SARCASTIC_TEMPLATES } else { PLAIN_TEMPLATES };
                let template = templates.choose(&mut rng).copied().unwrap_or(templates[0]);
                Example {
                    id: format!("{}-{split}-{i:05}", name.as_str()),
                    text: fill(template, &mut rng),
                    label,
                    dataset: name,
                    split,
                }
            })
            .collect()
    };
    let train = make(Split::Train, n_train);
    let test = make(Split::Test, n_test);
    DatasetBundle::new(name, train, test)
}

/// A small RoBERTa-family config; `num_labels` fills `id2label` with the
/// GoEmotions names (28) or NEGATIVE/POSITIVE (2).
pub fn toy_encoder_config(vocab_size: usize, num_labels: Option<usize>) -> EncoderConfig {
    let id2label: BTreeMap<String, String> = match num_labels {
        None => BTreeMap::new(),
        Some(EMOTION_LABELS) => GOEMOTIONS_LABELS
            .iter()
            .enumerate()
            .map(|(i, l)| (i.to_string(), l.to_string()))
            .collect(),
        Some(SENTIMENT_LABELS) => [("0", "NEGATIVE"), ("1", "POSITIVE")]
            .into_iter()
            .map(|(i, l)| (i.to_string(), l.to_string()))
            .collect(),
        Some(n) => (0..n).map(|i| (i.to_string(), format!("LABEL_{i}"))).collect(),
    };
    EncoderConfig {
        model_type: "roberta".into(),
        vocab_size,
        hidden_size: 32,
        num_hidden_layers: 2,
        num_attention_heads: 4,
        intermediate_size: 64,
        max_position_embeddings: 160,
        type_vocab_size: 1,
        layer_norm_eps: 1e-5,
        pad_token_id: 1,
        hidden_dropout_prob: 0.1,
        attention_probs_dropout_prob: 0.1,
        hidden_act: "gelu".into(),
        id2label,
        extra: serde_json::Map::new(),
    }
}

/// Writes a randomly initialised checkpoint directory. With `num_labels`
/// it carries a sequence-classification head, otherwise a masked-LM head.
pub fn write_toy_checkpoint(dir: &Path, num_labels: Option<usize>, seed: u64) -> Result<()> {
    let tokenizer_json = word_level_tokenizer_json(&toy_words());
    let tokenizer = crate::nn::TextTokenizer::from_json(&tokenizer_json)?;
    let config = toy_encoder_config(tokenizer.vocab_size(), num_labels);
    let store = ParamStore::cpu(seed);
    let vb = store.var_builder();
    let encoder = Encoder::load(&config, vb.pp(config.family()?.prefix()))?;
    match num_labels {
        Some(n) => drop(ClassifierHead::load(&config, n, vb)?),
        None => drop(MlmHead::load(&config, encoder.word_embeddings(), vb)?),
    }
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    write_atomic(&dir.join("config.json"), serde_json::to_string_pretty(&config)?.as_bytes())?;
    write_atomic(&dir.join("tokenizer.json"), tokenizer_json.as_bytes())?;
    store.save_safetensors(&dir.join("model.safetensors"), "")
}

fn word_vector(word: &str, dim: usize, seed: u64) -> Vec<f32> {
    let digest = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(word.as_bytes()).finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(key);
    (0..dim).map(|_| rng.sample::<f32, _>(StandardNormal) * 0.3).collect()
}

/// Writes a `token v1 .. v_dim` vector file for the toy words. Inflected
/// forms in the stem-only list are written under their stem, and a few
/// words get no vector at all.
pub fn write_toy_vectors(path: &Path, dim: usize, seed: u64) -> Result<()> {
    let mut out = String::new();
    for word in toy_words() {
        if NO_VECTOR.contains(&word.as_str()) {
            continue;
        }
        let key = STEM_ONLY.iter().find(|(w, _)| *w == word).map_or(word.as_str(), |(_, s)| *s);
        out.push_str(key);
        for v in word_vector(key, dim, seed) {
            let _ = write!(out, " {v:.5}");
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Paths of a full set of toy assets.
#[derive(Clone, Debug)]
pub struct ToyAssets {
    pub root: PathBuf,
    pub sarc_base: PathBuf,
    pub emotion: PathBuf,
    pub sentiment: PathBuf,
    pub vectors_300: PathBuf,
    pub vectors_100: PathBuf,
}

impl ToyAssets {
    pub fn asset_paths(&self) -> AssetPaths {
        AssetPaths {
            sarc_encoder: self.sarc_base.clone(),
            emotion: self.emotion.clone(),
            sentiment: self.sentiment.clone(),
            word_vectors: self.vectors_300.clone(),
            nbow_vectors: self.vectors_100.clone(),
        }
    }
}

/// Writes the base encoder, both extractors and both vector files under `dir`.
pub fn write_toy_assets(dir: &Path, seed: u64) -> Result<ToyAssets> {
    let assets = ToyAssets {
        root: dir.to_path_buf(),
        sarc_base: dir.join("sarc_base"),
        emotion: dir.join("emotion"),
        sentiment: dir.join("sentiment"),
        vectors_300: dir.join("vectors.300d.txt"),
        vectors_100: dir.join("vectors.100d.txt"),
    };
    write_toy_checkpoint(&assets.sarc_base, None, seed)?;
    write_toy_checkpoint(&assets.emotion, Some(EMOTION_LABELS), seed.wrapping_add(1))?;
    write_toy_checkpoint(&assets.sentiment, Some(SENTIMENT_LABELS), seed.wrapping_add(2))?;
    write_toy_vectors(&assets.vectors_300, 300, seed)?;
    write_toy_vectors(&assets.vectors_100, 100, seed)?;
    Ok(assets)
}

/// A training config sized for the toy assets: short runs, a higher
/// learning rate and narrow layers.
pub fn toy_train_config(assets: &ToyAssets, dataset: DatasetName, data_dir: &Path) -> TrainConfig {
    let mut config = TrainConfig::for_dataset(dataset);
    config.data_dir = data_dir.to_path_buf();
    config.assets = assets.asset_paths();
    config.max_length = 16;
    config.max_epochs = 6;
    config.learning_rate = 1e-3;
    config.batch_size = 8;
    config.cnn = CnnSettings {
        filter_sizes: vec![3, 4, 5],
        filters_per_size: 8,
        dropout_rate: CnnConfig::default().dropout_rate,
        max_words: Some(16),
    };
    config.fusion = FusionConfig {
        projection_dim: 16,
        head_hidden_dim: 32,
        ..FusionConfig::default()
    };
    config.mlm = MlmConfig {
        epochs: 1,
        batch_size: 8,
        max_length: 16,
        learning_rate: 1e-3,
        ..MlmConfig::default()
    };
    config
}
