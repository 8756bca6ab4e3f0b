//! Frozen emotion and sentiment classifiers used as feature extractors.
//!
//! Each extractor yields the last-hidden-state vector at the CLS position and
//! the classifier's label scores. Weights are loaded as plain tensors, never
//! as optimizer variables, so no training loop can update them.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use candle_nn::VarBuilder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::write_atomic;
use crate::error::{Error, Result};
use crate::nn::{read_checkpoint, tensor_checksum, ClassifierHead, Encoder, EncoderConfig, Mode, ParamStore, TextTokenizer};

/// Width of the emotion label-score vector.
pub const EMOTION_LABELS: usize = 28;
/// Width of the sentiment distribution.
pub const SENTIMENT_LABELS: usize = 2;

const INFERENCE_CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtractorRole {
    Emotion,
    Sentiment,
}

impl ExtractorRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorRole::Emotion => "emotion",
            ExtractorRole::Sentiment => "sentiment",
        }
    }

    pub fn num_labels(self) -> usize {
        match self {
            ExtractorRole::Emotion => EMOTION_LABELS,
            ExtractorRole::Sentiment => SENTIMENT_LABELS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmotionFeatures {
    pub u_cls: Vec<f32>,
    /// Independent per-label sigmoid scores; not normalized to sum 1.
    pub el: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentFeatures {
    pub s_cls: Vec<f32>,
    /// Softmax distribution over the model's own label order.
    pub sl: Vec<f32>,
}

/// CLS vector and label scores of one text, as cached on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    pub cls: Vec<f32>,
    pub scores: Vec<f32>,
}

/// A loaded classifier whose parameters receive no updates.
pub struct FrozenExtractor {
    role: ExtractorRole,
    model_id: String,
    encoder: Encoder,
    head: ClassifierHead,
    tokenizer: TextTokenizer,
    params: Vec<(String, Tensor)>,
    labels: Vec<String>,
    inference: bool,
    device: Device,
}

impl std::fmt::Debug for FrozenExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrozenExtractor")
            .field("role", &self.role)
            .field("model_id", &self.model_id)
            .field("hidden_size", &self.hidden_size())
            .finish()
    }
}

impl FrozenExtractor {
    /// Loads `config.json`, `model.safetensors` and `tokenizer.json` from a
    /// checkpoint directory.
    pub fn load(dir: &Path, role: ExtractorRole) -> Result<Self> {
        let what = format!("{} extractor", role.as_str());
        let config = EncoderConfig::read(&dir.join("config.json"))?;
        let tokenizer = TextTokenizer::from_file(&dir.join("tokenizer.json"))?;
        let device = Device::Cpu;
        let weights_path = dir.join("model.safetensors");
        if !weights_path.exists() {
            return Err(Error::load(what, &weights_path, "file not found"));
        }
        let family = config.family()?;
        let tensors: HashMap<String, Tensor> = read_checkpoint(&weights_path, family, &device)?
            .into_iter()
            .map(|(k, t)| Ok((k, t.to_dtype(DType::F32)?)))
            .collect::<Result<_>>()?;
        let mut params: Vec<(String, Tensor)> = tensors.iter().map(|(k, t)| (k.clone(), t.clone())).collect();
        params.sort_by(|a, b| a.0.cmp(&b.0));
        let vb = VarBuilder::from_tensors(tensors, DType::F32, &device);
        let mut ex = Self::build(role, config, tokenizer, vb, params, device)
            .map_err(|e| Error::load(what, dir, e))?;
        ex.model_id = ex.checksum()?;
        Ok(ex)
    }

    /// Builds an extractor over parameters that live in a trainable
    /// [`ParamStore`]. Such an extractor reports itself as not frozen; it
    /// exists to exercise [`assert_frozen`].
    pub fn from_store(
        store: &ParamStore,
        role: ExtractorRole,
        config: EncoderConfig,
        tokenizer: TextTokenizer,
    ) -> Result<Self> {
        let device = store.device().clone();
        let vb = store.var_builder();
        let mut ex = Self::build(role, config, tokenizer, vb, Vec::new(), device)?;
        ex.params = store.named_tensors();
        ex.model_id = ex.checksum()?;
        Ok(ex)
    }

    fn build(
        role: ExtractorRole,
        config: EncoderConfig,
        tokenizer: TextTokenizer,
        vb: VarBuilder,
        params: Vec<(String, Tensor)>,
        device: Device,
    ) -> Result<Self> {
        let family = config.family()?;
        let mut labels = config.labels();
        if labels.is_empty() {
            labels = (0..role.num_labels()).map(|i| format!("LABEL_{i}")).collect();
        }
        if labels.len() != role.num_labels() {
            return Err(Error::Shape {
                branch: role.as_str().into(),
                message: format!("expected {} labels, checkpoint has {}", role.num_labels(), labels.len()),
            });
        }
        let encoder = Encoder::load(&config, vb.pp(family.prefix()))?;
        let head = ClassifierHead::load(&config, labels.len(), vb)?;
        Ok(FrozenExtractor {
            role,
            model_id: String::new(),
            encoder,
            head,
            tokenizer,
            params,
            labels,
            inference: true,
            device,
        })
    }

    pub fn role(&self) -> ExtractorRole {
        self.role
    }

    /// Content hash of the weights; stable identity for feature caching.
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.hidden_size()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of_label(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.eq_ignore_ascii_case(name))
    }

    pub fn checksum(&self) -> Result<String> {
        tensor_checksum(&self.params)
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn is_inference(&self) -> bool {
        self.inference
    }

    /// CLS vectors and label scores, in input order. Inference only.
    pub fn extract<S: AsRef<str>>(&self, texts: &[S], max_length: usize) -> Result<Vec<RawFeatures>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(INFERENCE_CHUNK) {
            let batch = self.tokenizer.encode_batch(chunk, max_length)?;
            let (ids, mask) = batch.tensors(&self.device)?;
            let cls = self.encoder.cls(&ids, &mask, Mode::Eval)?;
            let logits = self.head.forward(&cls, Mode::Eval)?;
            let scores = match self.role {
                ExtractorRole::Emotion => candle_nn::ops::sigmoid(&logits)?,
                ExtractorRole::Sentiment => candle_nn::ops::softmax_last_dim(&logits)?,
            };
            let cls = cls.to_dtype(DType::F32)?.to_vec2::<f32>()?;
            let scores = scores.to_dtype(DType::F32)?.to_vec2::<f32>()?;
            out.extend(cls.into_iter().zip(scores).map(|(cls, scores)| RawFeatures { cls, scores }));
        }
        Ok(out)
    }

    /// As [`FrozenExtractor::extract`], serving hits from `cache` and storing
    /// misses in it.
    pub fn extract_cached<S: AsRef<str>>(
        &self,
        texts: &[S],
        max_length: usize,
        cache: Option<&FeatureCache>,
    ) -> Result<Vec<RawFeatures>> {
        let Some(cache) = cache else {
            return self.extract(texts, max_length);
        };
        let mut out: Vec<Option<RawFeatures>> = texts
            .iter()
            .map(|t| cache.get(&self.model_id, max_length, t.as_ref()))
            .collect();
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let fresh_texts: Vec<&str> = missing.iter().map(|&i| texts[i].as_ref()).collect();
            let fresh = self.extract(&fresh_texts, max_length)?;
            for (&i, f) in missing.iter().zip(fresh) {
                cache.put(&self.model_id, max_length, texts[i].as_ref(), &f)?;
                out[i] = Some(f);
            }
        }
        Ok(out.into_iter().map(|f| f.expect("filled above")).collect())
    }
}

/// True iff no parameter is an optimizer variable and the extractor is in
/// inference mode.
pub fn assert_frozen(extractor: &FrozenExtractor) -> bool {
    extractor.inference && extractor.params.iter().all(|(_, t)| !t.is_variable())
}

/// Emotion classifier over 28 labels, read out with per-label sigmoids.
#[derive(Debug)]
pub struct EmotionExtractor(FrozenExtractor);

impl EmotionExtractor {
    pub fn load(dir: &Path) -> Result<Self> {
        FrozenExtractor::load(dir, ExtractorRole::Emotion).map(EmotionExtractor)
    }

    pub fn new(inner: FrozenExtractor) -> Result<Self> {
        match inner.role {
            ExtractorRole::Emotion => Ok(EmotionExtractor(inner)),
            ExtractorRole::Sentiment => Err(Error::Contract("sentiment model given as emotion extractor".into())),
        }
    }

    pub fn inner(&self) -> &FrozenExtractor {
        &self.0
    }

    pub fn extract_emotion<S: AsRef<str>>(&self, texts: &[S], max_length: usize) -> Result<Vec<EmotionFeatures>> {
        Ok(self
            .0
            .extract(texts, max_length)?
            .into_iter()
            .map(|f| EmotionFeatures {
                u_cls: f.cls,
                el: f.scores,
            })
            .collect())
    }
}

/// Binary sentiment classifier, read out with a softmax.
#[derive(Debug)]
pub struct SentimentExtractor(FrozenExtractor);

impl SentimentExtractor {
    pub fn load(dir: &Path) -> Result<Self> {
        FrozenExtractor::load(dir, ExtractorRole::Sentiment).map(SentimentExtractor)
    }

    pub fn new(inner: FrozenExtractor) -> Result<Self> {
        match inner.role {
            ExtractorRole::Sentiment => Ok(SentimentExtractor(inner)),
            ExtractorRole::Emotion => Err(Error::Contract("emotion model given as sentiment extractor".into())),
        }
    }

    pub fn inner(&self) -> &FrozenExtractor {
        &self.0
    }

    pub fn extract_sentiment<S: AsRef<str>>(
        &self,
        texts: &[S],
        max_length: usize,
    ) -> Result<Vec<SentimentFeatures>> {
        Ok(self
            .0
            .extract(texts, max_length)?
            .into_iter()
            .map(|f| SentimentFeatures {
                s_cls: f.cls,
                sl: f.scores,
            })
            .collect())
    }
}

/// Content-addressed on-disk memo of extractor outputs, keyed by
/// (model id, max_length, text).
#[derive(Clone, Debug)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FeatureCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, model_id: &str, max_length: usize, text: &str) -> PathBuf {
        let mut h = Sha256::new();
        h.update(model_id.as_bytes());
        h.update([0]);
        h.update((max_length as u64).to_le_bytes());
        h.update(text.as_bytes());
        let key = hex::encode(h.finalize());
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, model_id: &str, max_length: usize, text: &str) -> Option<RawFeatures> {
        let bytes = std::fs::read(self.entry_path(model_id, max_length, text)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put(&self, model_id: &str, max_length: usize, text: &str, features: &RawFeatures) -> Result<()> {
        write_atomic(&self.entry_path(model_id, max_length, text), &serde_json::to_vec(features)?)
    }
}
