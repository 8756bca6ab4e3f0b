//! Sarcasm detection by fusing four views of a text: a trainable transformer
//! encoder adapted to sarcastic language, frozen emotion and sentiment
//! classifiers, and a convolutional network over word vectors.

pub mod baselines;
pub mod cli;
pub mod cnn_branch;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod extractors;
pub mod fusion;
pub mod lexical;
pub mod nn;
pub mod sarc_encoder;
pub mod toy;
pub mod training;

pub use error::{Error, Result};
