//! The four-branch model: construction, training, prediction and
//! checkpointing.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use super::head::{BranchDims, BranchInputs, FusedRepresentation, FusionHead, Prediction};
use crate::cnn_branch::CnnBranch;
use crate::config::TrainConfig;
use crate::corpus::{write_atomic, DatasetBundle, Example};
use crate::error::{Error, Result};
use crate::extractors::{EmotionExtractor, FeatureCache, RawFeatures, SentimentExtractor};
use crate::lexical::{build_vocabulary, encode_for_cnn, load_embeddings, PorterStemmer, Vocabulary};
use crate::nn::{Mode, ParamStore};
use crate::sarc_encoder::SarcEncoder;
use crate::training::{fit, predict_probs, FitOutcome, TextClassifier};

const SARC_PREFIX: &str = "sarc_encoder";
const CNN_PREFIX: &str = "cnn";
const FUSION_PREFIX: &str = "fusion";

#[derive(Clone, Debug)]
struct FrozenRow {
    emotion: RawFeatures,
    sentiment: RawFeatures,
}

/// Identity of the frozen branches a checkpoint was trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BranchManifest {
    dims: BranchDims,
    emotion_model: String,
    sentiment_model: String,
}

/// The fused classifier. The sarcasm encoder, CNN branch, projections and
/// head share one [`ParamStore`]; the two extractors sit outside it.
pub struct FusedModel {
    store: ParamStore,
    sarc: SarcEncoder,
    emotion: Arc<EmotionExtractor>,
    sentiment: Arc<SentimentExtractor>,
    cnn: CnnBranch,
    vocab: Vocabulary,
    head: FusionHead,
    max_length: usize,
    cache: Option<FeatureCache>,
    memo: Mutex<HashMap<String, FrozenRow>>,
}

impl std::fmt::Debug for FusedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FusedModel")
            .field("dims", &self.head.dims())
            .field("max_length", &self.max_length)
            .finish()
    }
}

impl FusedModel {
    /// Fresh model for `config`: encoder weights from
    /// `config.assets.sarc_encoder`, CNN vocabulary from `train` and
    /// embeddings from `config.assets.word_vectors`.
    pub fn build(
        config: &TrainConfig,
        train: &[Example],
        emotion: Arc<EmotionExtractor>,
        sentiment: Arc<SentimentExtractor>,
    ) -> Result<Self> {
        let store = ParamStore::cpu(config.seed);
        let sarc = SarcEncoder::load_into(&config.assets.sarc_encoder, &store, SARC_PREFIX)?;
        let vocab = build_vocabulary(train)?;
        let cnn_config = config.cnn_config();
        let table = load_embeddings(
            &vocab,
            &config.assets.word_vectors,
            cnn_config.embedding_dim,
            &PorterStemmer,
            config.seed,
        )?;
        let cnn = CnnBranch::with_embeddings(&table, &cnn_config, &store, CNN_PREFIX)?;
        let dims = BranchDims {
            sarc: sarc.hidden_size(),
            emotion: emotion.inner().hidden_size(),
            sentiment: sentiment.inner().hidden_size(),
            cnn: cnn.output_dim(),
        };
        let head = FusionHead::load(dims, &config.fusion, cnn_config.dropout_rate, store.var_builder().pp(FUSION_PREFIX))?;
        Ok(FusedModel {
            store,
            sarc,
            emotion,
            sentiment,
            cnn,
            vocab,
            head,
            max_length: config.max_length,
            cache: config.resolved_cache_dir().map(FeatureCache::new),
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn head(&self) -> &FusionHead {
        &self.head
    }

    pub fn sarc_encoder(&self) -> &SarcEncoder {
        &self.sarc
    }

    pub fn cnn(&self) -> &CnnBranch {
        &self.cnn
    }

    pub fn emotion(&self) -> &EmotionExtractor {
        &self.emotion
    }

    pub fn sentiment(&self) -> &SentimentExtractor {
        &self.sentiment
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    /// Checksum of the trainable parameters under one branch prefix:
    /// `sarc_encoder`, `cnn`, or `fusion.<layer>`.
    pub fn checksum(&self, prefix: &str) -> Result<String> {
        self.store.checksum(&format!("{prefix}."))
    }

    fn frozen_rows(&self, texts: &[&str]) -> Result<Vec<FrozenRow>> {
        let mut memo = self.memo.lock().expect("feature memo lock");
        let mut missing: Vec<&str> = texts.iter().copied().filter(|t| !memo.contains_key(*t)).collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let cache = self.cache.as_ref();
            let emo = self.emotion.inner().extract_cached(&missing, self.max_length, cache)?;
            let sent = self.sentiment.inner().extract_cached(&missing, self.max_length, cache)?;
            for ((t, emotion), sentiment) in missing.iter().zip(emo).zip(sent) {
                memo.insert(t.to_string(), FrozenRow { emotion, sentiment });
            }
        }
        Ok(texts.iter().map(|t| memo[*t].clone()).collect())
    }

    /// Runs all four branches on `texts`.
    pub fn branch_inputs(&self, texts: &[&str], mode: Mode<'_>) -> Result<BranchInputs> {
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::Contract(format!("text {i} of the batch is empty")));
        }
        let v_cls = self.sarc.encode_sarcasm(texts, self.max_length, mode)?;
        let rows = self.frozen_rows(texts)?;
        let dev = self.store.device();
        let stack = |pick: &dyn Fn(&FrozenRow) -> &Vec<f32>| -> Result<Tensor> {
            let width = pick(&rows[0]).len();
            let flat: Vec<f32> = rows.iter().flat_map(|r| pick(r).iter().copied()).collect();
            Ok(Tensor::from_vec(flat, (rows.len(), width), dev)?.to_dtype(self.store.dtype())?)
        };
        let u_cls = stack(&|r| &r.emotion.cls)?;
        let el = stack(&|r| &r.emotion.scores)?;
        let s_cls = stack(&|r| &r.sentiment.cls)?;
        let sl = stack(&|r| &r.sentiment.scores)?;
        let words = self.cnn.config().max_words;
        let indices: Vec<Vec<u32>> = texts.iter().map(|t| encode_for_cnn(t, &self.vocab, words)).collect();
        let c = self.cnn.cnn_forward(&indices)?;
        Ok(BranchInputs {
            v_cls,
            u_cls,
            el,
            s_cls,
            sl,
            c,
        })
    }

    pub fn fused_forward(&self, texts: &[&str], mode: Mode<'_>) -> Result<(FusedRepresentation, Tensor)> {
        let inputs = self.branch_inputs(texts, mode)?;
        self.head.forward(&inputs, mode)
    }

    /// Inference-mode predictions in input order.
    pub fn predict(&self, texts: &[&str]) -> Result<Vec<Prediction>> {
        Ok(predict_probs(self, texts)?.into_iter().map(Prediction::from_probs).collect())
    }

    /// Writes the checkpoint layout: `fusion/`, `sarc_encoder/`, `cnn/`,
    /// `config.snapshot`, and `history.jsonl` when `history` is given.
    pub fn save(&self, dir: &Path, config: &TrainConfig, history: Option<&FitOutcome>) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let fusion_dir = dir.join("fusion");
        self.store
            .save_safetensors(&fusion_dir.join("model.safetensors"), &format!("{FUSION_PREFIX}."))?;
        let manifest = BranchManifest {
            dims: self.head.dims(),
            emotion_model: self.emotion.inner().model_id().to_string(),
            sentiment_model: self.sentiment.inner().model_id().to_string(),
        };
        write_atomic(&fusion_dir.join("branches.json"), &serde_json::to_vec_pretty(&manifest)?)?;
        self.sarc.save(&dir.join("sarc_encoder"), &self.store)?;
        let cnn_dir = dir.join("cnn");
        self.store
            .save_safetensors(&cnn_dir.join("model.safetensors"), &format!("{CNN_PREFIX}."))?;
        self.vocab.save(&cnn_dir.join("vocab.txt"))?;
        write_atomic(&dir.join("config.snapshot"), config.to_toml()?.as_bytes())?;
        if let Some(outcome) = history {
            let mut buf = Vec::new();
            for rec in &outcome.history {
                serde_json::to_writer(&mut buf, rec)?;
                buf.push(b'\n');
            }
            write_atomic(&dir.join("history.jsonl"), &buf)?;
        }
        Ok(())
    }

    /// Reads `config.snapshot` from a checkpoint directory.
    pub fn checkpoint_config(dir: &Path) -> Result<TrainConfig> {
        TrainConfig::from_file(&dir.join("config.snapshot"), &[])
    }

    /// Restores a checkpoint written by [`FusedModel::save`]. The extractors
    /// must be the ones it was trained with.
    pub fn load(dir: &Path, emotion: Arc<EmotionExtractor>, sentiment: Arc<SentimentExtractor>) -> Result<Self> {
        let config = Self::checkpoint_config(dir)?;
        let incompatible = |e: Error| Error::Compatibility(format!("{}: {e}", dir.display()));
        let manifest: BranchManifest = {
            let path = dir.join("fusion").join("branches.json");
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_slice(&bytes)?
        };
        if manifest.emotion_model != emotion.inner().model_id() || manifest.sentiment_model != sentiment.inner().model_id() {
            return Err(Error::Compatibility(
                "extractor weights differ from the ones the checkpoint was trained with".into(),
            ));
        }
        let store = ParamStore::cpu(config.seed);
        let sarc = SarcEncoder::load_into(&dir.join("sarc_encoder"), &store, SARC_PREFIX)?;
        let vocab = Vocabulary::load(&dir.join("cnn").join("vocab.txt"))?;
        store.load_safetensors(&dir.join("cnn").join("model.safetensors"), &format!("{CNN_PREFIX}."), |_| true)?;
        store.load_safetensors(&dir.join("fusion").join("model.safetensors"), &format!("{FUSION_PREFIX}."), |_| true)?;
        let cnn_config = config.cnn_config();
        let cnn = CnnBranch::build(&cnn_config, vocab.len(), store.strict_builder().pp(CNN_PREFIX)).map_err(incompatible)?;
        let dims = BranchDims {
            sarc: sarc.hidden_size(),
            emotion: emotion.inner().hidden_size(),
            sentiment: sentiment.inner().hidden_size(),
            cnn: cnn.output_dim(),
        };
        if dims != manifest.dims {
            return Err(Error::Compatibility(format!(
                "branch dimensions {dims:?} differ from checkpoint {:?}",
                manifest.dims
            )));
        }
        let head = FusionHead::load(dims, &config.fusion, cnn_config.dropout_rate, store.strict_builder().pp(FUSION_PREFIX))
            .map_err(incompatible)?;
        Ok(FusedModel {
            store,
            sarc,
            emotion,
            sentiment,
            cnn,
            vocab,
            head,
            max_length: config.max_length,
            cache: config.resolved_cache_dir().map(FeatureCache::new),
            memo: Mutex::new(HashMap::new()),
        })
    }
}

impl TextClassifier for FusedModel {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn logits(&self, texts: &[&str], mode: Mode<'_>) -> Result<Tensor> {
        Ok(self.fused_forward(texts, mode)?.1.to_dtype(DType::F32)?)
    }

    fn prepare(&self, texts: &[&str]) -> Result<()> {
        self.frozen_rows(texts).map(drop)
    }
}

/// A trained model and its training history.
#[derive(Debug)]
pub struct TrainedModel {
    pub model: FusedModel,
    pub outcome: FitOutcome,
    pub checkpoint: Option<PathBuf>,
}

/// Trains the fused model on the train split of `bundle` and, when `out` is
/// given, writes the selected checkpoint there. The test split is never read.
pub fn train_fused(
    bundle: &DatasetBundle,
    config: &TrainConfig,
    emotion: Arc<EmotionExtractor>,
    sentiment: Arc<SentimentExtractor>,
    out: Option<&Path>,
) -> Result<TrainedModel> {
    config.validate()?;
    let model = FusedModel::build(config, bundle.train(), emotion, sentiment)?;
    let outcome = fit(&model, bundle.train(), &config.fit_config())?;
    if let Some(dir) = out {
        model.save(dir, config, Some(&outcome))?;
    }
    Ok(TrainedModel {
        model,
        outcome,
        checkpoint: out.map(Path::to_path_buf),
    })
}

/// Loads both extractors named in `config`.
pub fn load_extractors(config: &TrainConfig) -> Result<(Arc<EmotionExtractor>, Arc<SentimentExtractor>)> {
    Ok((
        Arc::new(EmotionExtractor::load(&config.assets.emotion)?),
        Arc::new(SentimentExtractor::load(&config.assets.sentiment)?),
    ))
}
