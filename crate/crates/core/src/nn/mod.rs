//! Neural-network plumbing shared by the encoder, CNN, fusion and baseline
//! models.

mod layers;
mod params;
mod tokenizer;
mod transformer;

pub use layers::{dropout, linear_normal, Conv1d, DropoutRng, LayerNorm, Mode};
pub use params::{tensor_checksum, ParamStore, Snapshot};
pub use tokenizer::{word_level_tokenizer_json, EncodedBatch, SpecialIds, TextTokenizer};
pub use transformer::{read_checkpoint, ClassifierHead, Encoder, EncoderConfig, Family, MlmHead};
