//! Bidirectional transformer encoder compatible with RoBERTa- and BERT-style
//! checkpoints, plus the sequence-classification and masked-LM heads.
//!
//! Parameter names follow the usual hub layout (`roberta.embeddings.*`,
//! `roberta.encoder.layer.N.*`, `classifier.*`, `lm_head.*`), so published
//! safetensors checkpoints load without renaming.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, IndexOp, Module, Tensor, D};
use candle_nn::{Embedding, Init, Linear, VarBuilder};
use serde::{Deserialize, Serialize};

use super::layers::{dropout, linear_normal, LayerNorm, Mode};
use crate::error::{Error, Result};

const INIT_STD: f64 = 0.02;

fn default_model_type() -> String {
    "roberta".into()
}
fn default_one() -> usize {
    1
}
fn default_eps() -> f64 {
    1e-5
}
fn default_dropout() -> f64 {
    0.1
}
fn default_act() -> String {
    "gelu".into()
}

/// The subset of a hub `config.json` the encoder needs. Unknown keys are kept
/// so that a rewritten config stays loadable by other tools.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    #[serde(default = "default_model_type")]
    pub model_type: String,
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_one")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default)]
    pub pad_token_id: u32,
    #[serde(default = "default_dropout")]
    pub hidden_dropout_prob: f64,
    #[serde(default = "default_dropout")]
    pub attention_probs_dropout_prob: f64,
    #[serde(default = "default_act")]
    pub hidden_act: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub id2label: BTreeMap<String, String>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl EncoderConfig {
    pub fn family(&self) -> Result<Family> {
        match self.model_type.as_str() {
            "roberta" | "xlm-roberta" | "camembert" => Ok(Family::Roberta),
            "bert" => Ok(Family::Bert),
            other => Err(Error::Compatibility(format!("unsupported encoder type `{other}`"))),
        }
    }

    /// Label names in index order, from `id2label`.
    pub fn labels(&self) -> Vec<String> {
        let mut pairs: Vec<(usize, &String)> = self
            .id2label
            .iter()
            .filter_map(|(k, v)| k.parse().ok().map(|i| (i, v)))
            .collect();
        pairs.sort();
        pairs.into_iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::load("encoder config", path, e))
    }

    fn validate(&self) -> Result<()> {
        if self.num_attention_heads == 0 || !self.hidden_size.is_multiple_of(self.num_attention_heads) {
            return Err(Error::Compatibility(format!(
                "hidden size {} is not divisible by {} attention heads",
                self.hidden_size, self.num_attention_heads
            )));
        }
        if !matches!(self.hidden_act.as_str(), "gelu" | "gelu_new") {
            return Err(Error::Compatibility(format!(
                "unsupported activation `{}`",
                self.hidden_act
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Roberta,
    Bert,
}

impl Family {
    /// Name prefix of the encoder body inside a full checkpoint.
    pub fn prefix(self) -> &'static str {
        match self {
            Family::Roberta => "roberta",
            Family::Bert => "bert",
        }
    }
}

fn embedding(rows: usize, dim: usize, vb: VarBuilder) -> Result<Embedding> {
    let w = vb.get_with_hints(
        (rows, dim),
        "weight",
        Init::Randn {
            mean: 0.0,
            stdev: INIT_STD,
        },
    )?;
    Ok(Embedding::new(w, dim))
}

#[derive(Clone, Debug)]
struct Embeddings {
    word: Embedding,
    position: Embedding,
    token_type: Embedding,
    norm: LayerNorm,
    family: Family,
    pad: u32,
    dropout: f64,
}

impl Embeddings {
    fn load(cfg: &EncoderConfig, family: Family, vb: VarBuilder) -> Result<Self> {
        Ok(Embeddings {
            word: embedding(cfg.vocab_size, cfg.hidden_size, vb.pp("word_embeddings"))?,
            position: embedding(cfg.max_position_embeddings, cfg.hidden_size, vb.pp("position_embeddings"))?,
            token_type: embedding(cfg.type_vocab_size, cfg.hidden_size, vb.pp("token_type_embeddings"))?,
            norm: LayerNorm::load(cfg.hidden_size, cfg.layer_norm_eps, vb.pp("LayerNorm"))?,
            family,
            pad: cfg.pad_token_id,
            dropout: cfg.hidden_dropout_prob,
        })
    }

    fn position_ids(&self, ids: &[Vec<u32>]) -> Vec<u32> {
        let mut out = Vec::with_capacity(ids.len() * ids.first().map_or(0, Vec::len));
        for row in ids {
            match self.family {
                // Non-pad tokens count up from pad + 1; pad tokens sit at pad.
                Family::Roberta => {
                    let mut next = self.pad;
                    for &id in row {
                        if id == self.pad {
                            out.push(self.pad);
                        } else {
                            next += 1;
                            out.push(next);
                        }
                    }
                }
                Family::Bert => out.extend(0..row.len() as u32),
            }
        }
        out
    }

    fn forward(&self, input_ids: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
        let (b, t) = input_ids.dims2()?;
        let positions = self.position_ids(&input_ids.to_vec2::<u32>()?);
        let max_pos = self.position.embeddings().dim(0)?;
        if let Some(&p) = positions.iter().max() {
            if p as usize >= max_pos {
                return Err(Error::Contract(format!(
                    "sequence length {t} exceeds the encoder's {max_pos} position embeddings"
                )));
            }
        }
        let positions = Tensor::from_vec(positions, (b, t), input_ids.device())?;
        let types = Tensor::zeros((b, t), DType::U32, input_ids.device())?;
        let e = self
            .word
            .forward(input_ids)?
            .add(&self.position.forward(&positions)?)?
            .add(&self.token_type.forward(&types)?)?;
        dropout(&self.norm.forward(&e)?, self.dropout, mode)
    }
}

#[derive(Clone, Debug)]
struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    intermediate: Linear,
    output: Linear,
    out_norm: LayerNorm,
    heads: usize,
    head_dim: usize,
    hidden_dropout: f64,
    attn_dropout: f64,
    exact_gelu: bool,
}

impl Layer {
    fn load(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        let att = vb.pp("attention");
        let sa = att.pp("self");
        Ok(Layer {
            query: linear_normal(h, h, INIT_STD, sa.pp("query"))?,
            key: linear_normal(h, h, INIT_STD, sa.pp("key"))?,
            value: linear_normal(h, h, INIT_STD, sa.pp("value"))?,
            attn_out: linear_normal(h, h, INIT_STD, att.pp("output").pp("dense"))?,
            attn_norm: LayerNorm::load(h, cfg.layer_norm_eps, att.pp("output").pp("LayerNorm"))?,
            intermediate: linear_normal(h, cfg.intermediate_size, INIT_STD, vb.pp("intermediate").pp("dense"))?,
            output: linear_normal(cfg.intermediate_size, h, INIT_STD, vb.pp("output").pp("dense"))?,
            out_norm: LayerNorm::load(h, cfg.layer_norm_eps, vb.pp("output").pp("LayerNorm"))?,
            heads: cfg.num_attention_heads,
            head_dim: h / cfg.num_attention_heads,
            hidden_dropout: cfg.hidden_dropout_prob,
            attn_dropout: cfg.attention_probs_dropout_prob,
            exact_gelu: cfg.hidden_act == "gelu",
        })
    }

    fn split_heads(&self, xs: &Tensor) -> Result<Tensor> {
        let (b, t, _) = xs.dims3()?;
        Ok(xs
            .reshape((b, t, self.heads, self.head_dim))?
            .transpose(1, 2)?
            .contiguous()?)
    }

    /// `mask_bias` has shape `(batch, 1, 1, seq)`: 0 for real tokens and a
    /// large negative value for padding.
    fn forward(&self, xs: &Tensor, mask_bias: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
        let (b, t, h) = xs.dims3()?;
        let q = self.split_heads(&self.query.forward(xs)?)?;
        let k = self.split_heads(&self.key.forward(xs)?)?;
        let v = self.split_heads(&self.value.forward(xs)?)?;
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?.broadcast_add(mask_bias)?;
        let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let probs = dropout(&probs, self.attn_dropout, mode)?;
        let ctx = probs
            .matmul(&v)?
            .transpose(1, 2)?
            .contiguous()?
            .reshape((b, t, h))?;
        let attn = dropout(&self.attn_out.forward(&ctx)?, self.hidden_dropout, mode)?;
        let xs = self.attn_norm.forward(&(attn + xs)?)?;
        let inner = self.intermediate.forward(&xs)?;
        let inner = if self.exact_gelu {
            inner.gelu_erf()?
        } else {
            inner.gelu()?
        };
        let out = dropout(&self.output.forward(&inner)?, self.hidden_dropout, mode)?;
        self.out_norm.forward(&(out + xs)?)
    }
}

/// The encoder body: embeddings followed by the transformer layers.
#[derive(Clone, Debug)]
pub struct Encoder {
    embeddings: Embeddings,
    layers: Vec<Layer>,
    config: EncoderConfig,
}

impl Encoder {
    /// `vb` points at the body, e.g. `root.pp("roberta")`.
    pub fn load(config: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        config.validate()?;
        let family = config.family()?;
        let embeddings = Embeddings::load(config, family, vb.pp("embeddings"))?;
        let layers = (0..config.num_hidden_layers)
            .map(|i| Layer::load(config, vb.pp("encoder").pp("layer").pp(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Encoder {
            embeddings,
            layers,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    pub fn word_embeddings(&self) -> &Tensor {
        self.embeddings.word.embeddings()
    }

    /// Last hidden state, shape `(batch, seq, hidden)`.
    pub fn forward(&self, input_ids: &Tensor, attention_mask: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
        let mut xs = self.embeddings.forward(input_ids, mode)?;
        let (b, t) = attention_mask.dims2()?;
        let mask = attention_mask.to_dtype(xs.dtype())?;
        let mask_bias = ((mask.ones_like()? - mask)? * -1e9)?.reshape((b, 1, 1, t))?;
        for layer in &self.layers {
            xs = layer.forward(&xs, &mask_bias, mode)?;
        }
        Ok(xs)
    }

    /// Hidden vector at the first (CLS) position, shape `(batch, hidden)`.
    pub fn cls(&self, input_ids: &Tensor, attention_mask: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
        Ok(self.forward(input_ids, attention_mask, mode)?.i((.., 0))?.contiguous()?)
    }
}

/// Sequence-classification head on top of the CLS hidden vector.
#[derive(Clone, Debug)]
pub enum ClassifierHead {
    /// `classifier.dense` → tanh → `classifier.out_proj`.
    Roberta { dense: Linear, out_proj: Linear, dropout: f64 },
    /// `bert.pooler.dense` → tanh → `classifier`.
    Bert { pooler: Linear, classifier: Linear, dropout: f64 },
}

impl ClassifierHead {
    /// `vb` points at the checkpoint root.
    pub fn load(config: &EncoderConfig, num_labels: usize, vb: VarBuilder) -> Result<Self> {
        let h = config.hidden_size;
        let p = config.hidden_dropout_prob;
        Ok(match config.family()? {
            Family::Roberta => ClassifierHead::Roberta {
                dense: linear_normal(h, h, INIT_STD, vb.pp("classifier").pp("dense"))?,
                out_proj: linear_normal(h, num_labels, INIT_STD, vb.pp("classifier").pp("out_proj"))?,
                dropout: p,
            },
            Family::Bert => ClassifierHead::Bert {
                pooler: linear_normal(h, h, INIT_STD, vb.pp("bert").pp("pooler").pp("dense"))?,
                classifier: linear_normal(h, num_labels, INIT_STD, vb.pp("classifier"))?,
                dropout: p,
            },
        })
    }

    /// Logits from CLS vectors of shape `(batch, hidden)`.
    pub fn forward(&self, cls: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
        match self {
            ClassifierHead::Roberta {
                dense,
                out_proj,
                dropout: p,
            } => {
                let x = dropout(cls, *p, mode)?;
                let x = dropout(&dense.forward(&x)?.tanh()?, *p, mode)?;
                Ok(out_proj.forward(&x)?)
            }
            ClassifierHead::Bert {
                pooler,
                classifier,
                dropout: p,
            } => {
                let x = dropout(&pooler.forward(cls)?.tanh()?, *p, mode)?;
                Ok(classifier.forward(&x)?)
            }
        }
    }
}

/// Masked-LM head with the decoder tied to the word embeddings.
#[derive(Clone, Debug)]
pub struct MlmHead {
    dense: Linear,
    norm: LayerNorm,
    decoder: Tensor,
    bias: Tensor,
}

impl MlmHead {
    /// `vb` points at the checkpoint root.
    pub fn load(config: &EncoderConfig, word_embeddings: &Tensor, vb: VarBuilder) -> Result<Self> {
        let h = config.hidden_size;
        let (dense_vb, norm_vb, bias_vb) = match config.family()? {
            Family::Roberta => {
                let lm = vb.pp("lm_head");
                (lm.pp("dense"), lm.pp("layer_norm"), lm)
            }
            Family::Bert => {
                let p = vb.pp("cls").pp("predictions");
                (p.pp("transform").pp("dense"), p.pp("transform").pp("LayerNorm"), p)
            }
        };
        Ok(MlmHead {
            dense: linear_normal(h, h, INIT_STD, dense_vb)?,
            norm: LayerNorm::load(h, config.layer_norm_eps, norm_vb)?,
            decoder: word_embeddings.clone(),
            bias: bias_vb.get_with_hints(config.vocab_size, "bias", Init::Const(0.0))?,
        })
    }

    /// Vocabulary logits for hidden vectors of shape `(n, hidden)`.
    pub fn forward(&self, hidden: &Tensor) -> Result<Tensor> {
        let x = self.norm.forward(&self.dense.forward(hidden)?.gelu_erf()?)?;
        Ok(x.matmul(&self.decoder.t()?)?.broadcast_add(&self.bias)?)
    }
}

/// Reads a safetensors checkpoint and normalizes names: legacy
/// `gamma`/`beta` become `weight`/`bias`, and a body saved without its
/// family prefix gets one.
pub fn read_checkpoint(path: &Path, family: Family, device: &Device) -> Result<HashMap<String, Tensor>> {
    let raw = candle_core::safetensors::load(path, device).map_err(|e| Error::load("encoder weights", path, e))?;
    let prefix = format!("{}.", family.prefix());
    let has_prefix = raw.keys().any(|k| k.starts_with(&prefix));
    Ok(raw
        .into_iter()
        .map(|(k, t)| {
            let k = if let Some(stem) = k.strip_suffix(".gamma") {
                format!("{stem}.weight")
            } else if let Some(stem) = k.strip_suffix(".beta") {
                format!("{stem}.bias")
            } else {
                k
            };
            let k = if !has_prefix && (k.starts_with("embeddings.") || k.starts_with("encoder.")) {
                format!("{prefix}{k}")
            } else {
                k
            };
            (k, t)
        })
        .collect())
}
