use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{write_atomic, Example};
use crate::error::{Error, Result};
use crate::lexical::word_tokenize;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Word vocabulary with `<pad>` at 0 and `<unk>` at 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut v = Vocabulary {
            token_to_index: HashMap::new(),
            index_to_token: Vec::new(),
        };
        v.insert(PAD_TOKEN);
        v.insert(UNK_TOKEN);
        v
    }
}

impl Vocabulary {
    fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.token_to_index.get(token) {
            return i;
        }
        let i = self.index_to_token.len();
        self.index_to_token.push(token.to_string());
        self.token_to_index.insert(token.to_string(), i);
        i
    }

    /// Builds a vocabulary from an ordered token list (specials are added
    /// first if absent).
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocabulary::default();
        for t in tokens {
            v.insert(t.as_ref());
        }
        v
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    /// Index of `token`, falling back to `<unk>`.
    pub fn index_or_unk(&self, token: &str) -> usize {
        self.index(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    /// One token per line, in index order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.index_to_token {
            out.push_str(t);
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<&str> = raw.lines().collect();
        if lines.first() != Some(&PAD_TOKEN) || lines.get(1) != Some(&UNK_TOKEN) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 1,
                message: format!("vocabulary must start with {PAD_TOKEN} and {UNK_TOKEN}"),
            });
        }
        let v = Vocabulary::from_tokens(lines.iter().copied());
        if v.len() != lines.len() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 0,
                message: "duplicate token in vocabulary file".into(),
            });
        }
        Ok(v)
    }
}

/// `<pad>`, `<unk>`, then every distinct token of `examples` in
/// first-occurrence order. Callers pass a train split only.
pub fn build_vocabulary(examples: &[Example]) -> Result<Vocabulary> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus("cannot build a vocabulary".into()));
    }
    let mut v = Vocabulary::default();
    for e in examples {
        for t in word_tokenize(&e.text) {
            v.insert(&t);
        }
    }
    Ok(v)
}

/// Word-tokenize, map to indices, truncate and right-pad to exactly
/// `max_words` entries.
pub fn encode_for_cnn(text: &str, vocab: &Vocabulary, max_words: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = word_tokenize(text)
        .iter()
        .take(max_words)
        .map(|t| vocab.index_or_unk(t) as u32)
        .collect();
    ids.resize(max_words, PAD_INDEX as u32);
    ids
}
