//! Subword tokenization for the transformer branches.

use std::path::Path;

use candle_core::{Device, Tensor};

use crate::error::{Error, Result};

/// A batch of fixed-length token id rows with their attention masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedBatch {
    pub ids: Vec<Vec<u32>>,
    pub mask: Vec<Vec<u32>>,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    pub fn tensors(&self, device: &Device) -> Result<(Tensor, Tensor)> {
        let shape = (self.len(), self.seq_len());
        let ids = Tensor::from_vec(self.ids.concat(), shape, device)?;
        let mask = Tensor::from_vec(self.mask.concat(), shape, device)?;
        Ok((ids, mask))
    }
}

/// Special token ids of a tokenizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpecialIds {
    pub cls: u32,
    pub sep: u32,
    pub pad: u32,
    pub mask: Option<u32>,
    pub unk: Option<u32>,
}

/// Wraps a `tokenizer.json` and produces `CLS T1 … Tn SEP PAD…` rows of an
/// exact length.
#[derive(Clone)]
pub struct TextTokenizer {
    inner: tokenizers::Tokenizer,
    special: SpecialIds,
}

impl std::fmt::Debug for TextTokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TextTokenizer")
            .field("vocab_size", &self.vocab_size())
            .field("special", &self.special)
            .finish()
    }
}

fn first_id(tok: &tokenizers::Tokenizer, candidates: &[&str]) -> Option<u32> {
    candidates.iter().find_map(|c| tok.token_to_id(c))
}

impl TextTokenizer {
    pub fn from_file(path: &Path) -> Result<Self> {
        let inner = tokenizers::Tokenizer::from_file(path).map_err(|e| Error::load("tokenizer", path, e))?;
        Self::from_tokenizer(inner).map_err(|e| Error::load("tokenizer", path, e))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let inner: tokenizers::Tokenizer =
            json.parse().map_err(|e: tokenizers::Error| Error::Tokenizer(e.to_string()))?;
        Self::from_tokenizer(inner)
    }

    fn from_tokenizer(inner: tokenizers::Tokenizer) -> Result<Self> {
        let missing = |what: &str| Error::Tokenizer(format!("no {what} token in vocabulary"));
        let special = SpecialIds {
            cls: first_id(&inner, &["<s>", "[CLS]"]).ok_or_else(|| missing("CLS"))?,
            sep: first_id(&inner, &["</s>", "[SEP]"]).ok_or_else(|| missing("SEP"))?,
            pad: first_id(&inner, &["<pad>", "[PAD]"]).ok_or_else(|| missing("PAD"))?,
            mask: first_id(&inner, &["<mask>", "[MASK]"]),
            unk: first_id(&inner, &["<unk>", "[UNK]"]),
        };
        Ok(TextTokenizer { inner, special })
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    pub fn vocab_size(&self) -> usize {
        self.inner.get_vocab_size(true)
    }

    /// Whether `id` is a marker token that masked-LM selection must skip.
    pub fn is_special(&self, id: u32) -> bool {
        let s = self.special;
        id == s.cls || id == s.sep || id == s.pad || Some(id) == s.mask
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.inner
            .save(path, false)
            .map_err(|e| Error::Tokenizer(format!("{}: {e}", path.display())))
    }

    /// Content token ids of one text, without markers or truncation.
    pub fn content_ids(&self, text: &str) -> Result<Vec<u32>> {
        let enc = self
            .inner
            .encode(text, false)
            .map_err(|e| Error::Tokenizer(e.to_string()))?;
        Ok(enc.get_ids().to_vec())
    }

    /// Encodes each text to exactly `max_length` ids: content is truncated
    /// to `max_length - 2` and wrapped in CLS/SEP, then right-padded.
    pub fn encode_batch<S: AsRef<str>>(&self, texts: &[S], max_length: usize) -> Result<EncodedBatch> {
        if max_length < 2 {
            return Err(Error::Contract(format!("max_length {max_length} leaves no room for CLS and SEP")));
        }
        let mut ids = Vec::with_capacity(texts.len());
        let mut mask = Vec::with_capacity(texts.len());
        for text in texts {
            let mut content = self.content_ids(text.as_ref())?;
            content.truncate(max_length - 2);
            let mut row = Vec::with_capacity(max_length);
            row.push(self.special.cls);
            row.extend(content);
            row.push(self.special.sep);
            let real = row.len();
            row.resize(max_length, self.special.pad);
            let mut m = vec![1u32; real];
            m.resize(max_length, 0);
            ids.push(row);
            mask.push(m);
        }
        Ok(EncodedBatch { ids, mask })
    }
}

/// `tokenizer.json` for a lower-casing word-level tokenizer over `words`,
/// with RoBERTa-style markers at ids 0–4: `<s>`, `<pad>`, `</s>`, `<unk>`,
/// `<mask>`.
pub fn word_level_tokenizer_json(words: &[String]) -> String {
    let specials = ["<s>", "<pad>", "</s>", "<unk>", "<mask>"];
    let mut vocab = serde_json::Map::new();
    for (i, s) in specials.iter().enumerate() {
        vocab.insert(s.to_string(), serde_json::json!(i));
    }
    for w in words {
        let next = vocab.len();
        vocab.entry(w.to_lowercase()).or_insert(serde_json::json!(next));
    }
    let added: Vec<serde_json::Value> = specials
        .iter()
        .enumerate()
        .map(|(i, s)| {
            serde_json::json!({
                "id": i, "content": s, "single_word": false, "lstrip": false,
                "rstrip": false, "normalized": false, "special": true
            })
        })
        .collect();
    serde_json::json!({
        "version": "1.0",
        "truncation": null,
        "padding": null,
        "added_tokens": added,
        "normalizer": {"type": "Lowercase"},
        "pre_tokenizer": {"type": "BertPreTokenizer"},
        "post_processor": null,
        "decoder": null,
        "model": {"type": "WordLevel", "vocab": vocab, "unk_token": "<unk>"}
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> TextTokenizer {
        let words: Vec<String> = ["great", "movie", "so", "bad"].iter().map(|s| s.to_string()).collect();
        TextTokenizer::from_json(&word_level_tokenizer_json(&words)).unwrap()
    }

    #[test]
    fn specials_are_probed() {
        let s = tok().special();
        assert_eq!((s.cls, s.pad, s.sep, s.unk, s.mask), (0, 1, 2, Some(3), Some(4)));
    }

    #[test]
    fn rows_are_wrapped_truncated_and_padded() {
        let b = tok().encode_batch(&["Great movie", "so so so so bad", "zzz"], 5).unwrap();
        assert_eq!(b.ids[0], vec![0, 5, 6, 2, 1]);
        assert_eq!(b.mask[0], vec![1, 1, 1, 1, 0]);
        assert_eq!(b.ids[1], vec![0, 7, 7, 7, 2]);
        assert_eq!(b.ids[2], vec![0, 3, 2, 1, 1]);
    }

    #[test]
    fn too_short_max_length_is_rejected() {
        assert!(tok().encode_batch(&["x"], 1).is_err());
    }
}
