//! Train the fused classifier on a toy corpus, save it and reload it.

use sarcfuse::corpus::DatasetName;
use sarcfuse::fusion::{load_extractors, train_fused, FusedModel};
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let assets = toy::write_toy_assets(&dir.path().join("assets"), 11)?;
    let bundle = toy::toy_corpus(DatasetName::SarcMovies, 96, 32, 11)?;
    let config = toy::toy_train_config(&assets, DatasetName::SarcMovies, dir.path());
    let (emotion, sentiment) = load_extractors(&config)?;

    let out = dir.path().join("checkpoint");
    let trained = train_fused(&bundle, &config, emotion.clone(), sentiment.clone(), Some(&out))?;
    for r in &trained.outcome.history {
        println!("epoch {} loss {:.4} train acc {:.3}", r.epoch, r.train_loss, r.train_accuracy);
    }

    let model = FusedModel::load(&out, emotion, sentiment)?;
    let texts = ["yeah right , i totally love waiting in line", "the movie was fun"];
    let (z, _) = model.fused_forward(&texts, sarcfuse::nn::Mode::Eval)?;
    println!("fused representation {:?}", z.z.dims());
    for (text, p) in texts.iter().zip(model.predict(&texts)?) {
        println!("{:>14} {:.3}  {text}", p.predicted_label.as_str(), p.probs[1]);
    }
    Ok(())
}
