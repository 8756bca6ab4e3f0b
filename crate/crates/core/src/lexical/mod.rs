//! Word-level text handling: tokenization, stemming, vocabularies and
//! pretrained word vectors.

mod embeddings;
mod porter;
mod treebank;
mod vocab;

pub use embeddings::{load_embeddings, EmbeddingTable, Provenance, OOV_INIT_RANGE};
pub use porter::{PorterStemmer, Stemmer};
pub use treebank::{word_tokenize, WordTokenizer};
pub use vocab::{
    build_vocabulary, encode_for_cnn, Vocabulary, PAD_INDEX, PAD_TOKEN, UNK_INDEX, UNK_TOKEN,
};
