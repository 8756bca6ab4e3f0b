//! Per-branch projections and the classification head.

use candle_core::{Module, Tensor, D};
use candle_nn::{Linear, VarBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::extractors::{EMOTION_LABELS, SENTIMENT_LABELS};
use crate::nn::{dropout, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    /// Output width of every branch projection.
    pub projection_dim: usize,
    pub head_hidden_dim: usize,
    pub dropout_rate: f64,
    pub activation: Activation,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            projection_dim: 128,
            head_hidden_dim: 256,
            dropout_rate: 0.2,
            activation: Activation::Relu,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.projection_dim == 0 {
            return Err(Error::config("fusion.projection_dim", "must be positive"));
        }
        if self.head_hidden_dim == 0 {
            return Err(Error::config("fusion.head_hidden_dim", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("fusion.dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Width of the concatenated representation.
    pub fn fused_dim(&self) -> usize {
        Branch::ALL.len() * self.projection_dim
    }
}

/// The five projected inputs, in concatenation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Sarc,
    EmoCls,
    SentCls,
    Labels,
    Cnn,
}

impl Branch {
    pub const ALL: [Branch; 5] = [Branch::Sarc, Branch::EmoCls, Branch::SentCls, Branch::Labels, Branch::Cnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Sarc => "sarc",
            Branch::EmoCls => "emo_cls",
            Branch::SentCls => "sent_cls",
            Branch::Labels => "labels",
            Branch::Cnn => "cnn",
        }
    }

    fn param_name(self) -> &'static str {
        match self {
            Branch::Sarc => "proj_sarc",
            Branch::EmoCls => "proj_emo",
            Branch::SentCls => "proj_sent",
            Branch::Labels => "proj_labels",
            Branch::Cnn => "proj_cnn",
        }
    }

    fn position(self) -> usize {
        Branch::ALL.iter().position(|&b| b == self).expect("listed")
    }
}

/// Input widths of the branch projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchDims {
    pub sarc: usize,
    pub emotion: usize,
    pub sentiment: usize,
    pub cnn: usize,
}

impl BranchDims {
    pub fn input_dim(&self, branch: Branch) -> usize {
        match branch {
            Branch::Sarc => self.sarc,
            Branch::EmoCls => self.emotion,
            Branch::SentCls => self.sentiment,
            Branch::Labels => EMOTION_LABELS + SENTIMENT_LABELS,
            Branch::Cnn => self.cnn,
        }
    }
}

/// Raw branch outputs for a batch; every tensor has batch as its first axis.
#[derive(Clone, Debug)]
pub struct BranchInputs {
    pub v_cls: Tensor,
    pub u_cls: Tensor,
    pub el: Tensor,
    pub s_cls: Tensor,
    pub sl: Tensor,
    pub c: Tensor,
}

/// Projected branch vectors and their concatenation `z = [v, u, s, d, c]`.
#[derive(Clone, Debug)]
pub struct FusedRepresentation {
    pub v_l: Tensor,
    pub u_l: Tensor,
    pub s_l: Tensor,
    pub d_l: Tensor,
    pub c_l: Tensor,
    pub z: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `[non_sarcastic, sarcastic]`.
    pub probs: [f64; 2],
    pub predicted_label: Label,
}

impl Prediction {
    pub fn from_probs(probs: [f64; 2]) -> Self {
        let predicted_label = if probs[1] > probs[0] {
            Label::Sarcastic
        } else {
            Label::NonSarcastic
        };
        Prediction { probs, predicted_label }
    }
}

#[derive(Clone, Debug)]
pub struct FusionHead {
    projections: Vec<Linear>,
    hidden: Linear,
    out: Linear,
    dims: BranchDims,
    config: FusionConfig,
    cnn_dropout: f64,
}

impl FusionHead {
    /// `cnn_dropout` is applied to the CNN vector before its projection.
    pub fn load(dims: BranchDims, config: &FusionConfig, cnn_dropout: f64, vb: VarBuilder) -> Result<Self> {
        config.validate()?;
        let p = config.projection_dim;
        let projections = Branch::ALL
            .iter()
            .map(|&b| Ok(candle_nn::linear(dims.input_dim(b), p, vb.pp(b.param_name()))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(FusionHead {
            projections,
            hidden: candle_nn::linear(config.fused_dim(), config.head_hidden_dim, vb.pp("head_hidden"))?,
            out: candle_nn::linear(config.head_hidden_dim, 2, vb.pp("head_out"))?,
            dims,
            config: config.clone(),
            cnn_dropout,
        })
    }

    pub fn dims(&self) -> BranchDims {
        self.dims
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    /// Affine map and ReLU with the branch's own parameters.
    pub fn project_branch(&self, vector: &Tensor, which: Branch) -> Result<Tensor> {
        let expected = self.dims.input_dim(which);
        let got = vector.dim(D::Minus1)?;
        if got != expected {
            return Err(Error::Shape {
                branch: which.as_str().into(),
                message: format!("expected input dimension {expected}, got {got}"),
            });
        }
        Ok(self.projections[which.position()].forward(vector)?.relu()?)
    }

    /// Concatenates the 28 emotion scores and the 2-way sentiment
    /// distribution and projects the result.
    pub fn project_label_distributions(&self, el: &Tensor, sl: &Tensor) -> Result<Tensor> {
        let (e, s) = (el.dim(D::Minus1)?, sl.dim(D::Minus1)?);
        if e != EMOTION_LABELS || s != SENTIMENT_LABELS {
            return Err(Error::Shape {
                branch: Branch::Labels.as_str().into(),
                message: format!("expected {EMOTION_LABELS} + {SENTIMENT_LABELS} label scores, got {e} + {s}"),
            });
        }
        self.project_branch(&Tensor::cat(&[el, sl], D::Minus1)?, Branch::Labels)
    }

    pub fn fuse(&self, inputs: &BranchInputs, mode: Mode<'_>) -> Result<FusedRepresentation> {
        let v_l = self.project_branch(&inputs.v_cls, Branch::Sarc)?;
        let u_l = self.project_branch(&inputs.u_cls, Branch::EmoCls)?;
        let s_l = self.project_branch(&inputs.s_cls, Branch::SentCls)?;
        let d_l = self.project_label_distributions(&inputs.el, &inputs.sl)?;
        let c = dropout(&inputs.c, self.cnn_dropout, mode)?;
        let c_l = self.project_branch(&c, Branch::Cnn)?;
        let z = Tensor::cat(&[&v_l, &u_l, &s_l, &d_l, &c_l], D::Minus1)?;
        Ok(FusedRepresentation {
            v_l,
            u_l,
            s_l,
            d_l,
            c_l,
            z,
        })
    }

    /// Two logits from the concatenated representation.
    pub fn head_logits(&self, z: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
        let h = self.hidden.forward(z)?.relu()?;
        let h = dropout(&h, self.config.dropout_rate, mode)?;
        Ok(self.out.forward(&h)?)
    }

    pub fn forward(&self, inputs: &BranchInputs, mode: Mode<'_>) -> Result<(FusedRepresentation, Tensor)> {
        let rep = self.fuse(inputs, mode)?;
        let logits = self.head_logits(&rep.z, mode)?;
        Ok((rep, logits))
    }
}
