//! Multi-width convolution with max-over-time pooling over word vectors.

use sarcfuse::cnn_branch::{CnnBranch, CnnConfig};
use sarcfuse::corpus::DatasetName;
use sarcfuse::lexical::{build_vocabulary, encode_for_cnn, load_embeddings, PorterStemmer};
use sarcfuse::nn::ParamStore;
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let vectors = dir.path().join("vectors.txt");
    toy::write_toy_vectors(&vectors, 300, 2)?;
    let bundle = toy::toy_corpus(DatasetName::SarcMovies, 20, 0, 2)?;
    let vocab = build_vocabulary(bundle.train())?;
    let table = load_embeddings(&vocab, &vectors, 300, &PorterStemmer, 2)?;

    let config = CnnConfig {
        max_words: 20,
        ..CnnConfig::default()
    };
    let store = ParamStore::cpu(2);
    let cnn = CnnBranch::with_embeddings(&table, &config, &store, "cnn")?;
    let rows: Vec<Vec<u32>> = bundle.train()[..4]
        .iter()
        .map(|e| encode_for_cnn(&e.text, &vocab, config.max_words))
        .collect();
    let c = cnn.cnn_forward(&rows)?;
    println!("filter sizes {:?} x {} -> output {:?}", config.filter_sizes, config.filters_per_size, c.dims());
    Ok(())
}
