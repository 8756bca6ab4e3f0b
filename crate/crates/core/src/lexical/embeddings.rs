use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Stemmer, Vocabulary, PAD_INDEX};
use crate::error::{Error, Result};

/// Components of vectors drawn for words without any pretrained vector are
/// uniform on `[-OOV_INIT_RANGE, OOV_INIT_RANGE]`.
pub const OOV_INIT_RANGE: f32 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Pretrained,
    StemmedFallback,
    Random,
    PadZero,
}

/// Dense `(vocabulary size, dim)` matrix aligned with a [`Vocabulary`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f32>,
    provenance: Vec<Provenance>,
}

impl EmbeddingTable {
    pub fn from_rows(dim: usize, data: Vec<f32>, provenance: Vec<Provenance>) -> Result<Self> {
        if data.len() != dim * provenance.len() {
            return Err(Error::Contract(format!(
                "embedding data has {} values, expected {} x {dim}",
                data.len(),
                provenance.len()
            )));
        }
        Ok(EmbeddingTable { dim, data, provenance })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.provenance.len()
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn provenance(&self, index: usize) -> Provenance {
        self.provenance[index]
    }

    pub fn provenances(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Whether the row carries a vector from the pretrained file, either
    /// directly or through its stem.
    pub fn has_pretrained(&self, index: usize) -> bool {
        matches!(self.provenance[index], Provenance::Pretrained | Provenance::StemmedFallback)
    }
}

/// Builds the embedding table for `vocab` from a whitespace-separated text
/// vector file (`token v1 ... v_dim` per line).
///
/// Lookup order per token: the raw token, its lowercase form, then its stem.
/// Tokens with none of these get a seeded uniform random vector; `<pad>`
/// gets zeros.
pub fn load_embeddings(
    vocab: &Vocabulary,
    vector_file: &Path,
    dim: usize,
    stemmer: &dyn Stemmer,
    seed: u64,
) -> Result<EmbeddingTable> {
    let stems: Vec<String> = vocab.tokens().iter().map(|t| stemmer.stem(t)).collect();
    let mut wanted: HashSet<String> = HashSet::new();
    for (t, s) in vocab.tokens().iter().zip(&stems) {
        wanted.insert(t.clone());
        wanted.insert(t.to_lowercase());
        wanted.insert(s.clone());
    }
    let vectors = read_vectors(vector_file, dim, &wanted)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(vocab.len() * dim);
    let mut provenance = Vec::with_capacity(vocab.len());
    for (i, (token, stem)) in vocab.tokens().iter().zip(&stems).enumerate() {
        if i == PAD_INDEX {
            data.extend(std::iter::repeat_n(0.0, dim));
            provenance.push(Provenance::PadZero);
            continue;
        }
        let direct = vectors.get(token).or_else(|| vectors.get(&token.to_lowercase()));
        if let Some(v) = direct {
            data.extend_from_slice(v);
            provenance.push(Provenance::Pretrained);
        } else if let Some(v) = vectors.get(stem) {
            data.extend_from_slice(v);
            provenance.push(Provenance::StemmedFallback);
        } else {
            data.extend((0..dim).map(|_| rng.gen_range(-OOV_INIT_RANGE..=OOV_INIT_RANGE)));
            provenance.push(Provenance::Random);
        }
    }
    EmbeddingTable::from_rows(dim, data, provenance)
}

fn read_vectors(path: &Path, dim: usize, wanted: &HashSet<String>) -> Result<HashMap<String, Vec<f32>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values: Vec<&str> = fields.collect();
        // word2vec-style "count dim" header
        if line_no == 1 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected {dim} vector components, found {}", values.len()),
            });
        }
        if !wanted.contains(token) || out.contains_key(token) {
            continue;
        }
        let parsed = values
            .iter()
            .map(|v| v.parse::<f32>())
            .collect::<Result<Vec<f32>, _>>()
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad vector component: {e}"),
            })?;
        out.insert(token.to_string(), parsed);
    }
    Ok(out)
}
