//! Build a vocabulary, load word vectors with the lowercase/stem/random
//! fallback chain and show where each row came from.

use std::collections::BTreeMap;

use sarcfuse::corpus::DatasetName;
use sarcfuse::lexical::{build_vocabulary, encode_for_cnn, load_embeddings, PorterStemmer};
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let vectors = dir.path().join("vectors.txt");
    toy::write_toy_vectors(&vectors, 50, 3)?;

    let bundle = toy::toy_corpus(DatasetName::SarcTechnology, 60, 0, 3)?;
    let vocab = build_vocabulary(bundle.train())?;
    let table = load_embeddings(&vocab, &vectors, 50, &PorterStemmer, 3)?;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in table.provenances() {
        *counts.entry(format!("{p:?}")).or_default() += 1;
    }
    println!("{} rows of width {}: {counts:?}", table.rows(), table.dim());
    for word in ["running", "thrilled", "movie"] {
        if let Some(i) = vocab.index(word) {
            println!("{word:>10} -> row {i} ({:?})", table.provenance(i));
        }
    }
    let text = &bundle.train()[0].text;
    println!("{text:?} -> {:?}", encode_for_cnn(text, &vocab, 12));
    Ok(())
}
