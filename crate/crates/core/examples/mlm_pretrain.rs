//! Masked-LM adaptation of a small encoder on an in-domain corpus.

use sarcfuse::corpus::{merge_training_corpora, DatasetName};
use sarcfuse::sarc_encoder::{mlm_pretrain, MlmConfig};
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let assets = toy::write_toy_assets(&dir.path().join("assets"), 1)?;
    let bundles = [
        toy::toy_corpus(DatasetName::SarcMovies, 80, 0, 1)?,
        toy::toy_corpus(DatasetName::IacV2, 80, 0, 2)?,
    ];
    let corpus = merge_training_corpora(&bundles)?;
    let config = MlmConfig {
        epochs: 3,
        learning_rate: 1e-3,
        batch_size: 16,
        max_length: 16,
        ..MlmConfig::default()
    };
    let report = mlm_pretrain(&corpus, &assets.sarc_base, &dir.path().join("sarc_ptt"), &config)?;
    println!("epoch losses {:?}", report.epoch_losses);
    println!("mask rate {:.4} over {} tokens, {} steps", report.mask_rate(), report.eligible_tokens, report.steps);
    println!("body checksum {} -> {}", &report.base_checksum[..12], &report.final_checksum[..12]);
    Ok(())
}
