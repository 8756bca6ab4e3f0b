//! Emotion and sentiment read-outs from frozen classifiers.

use sarcfuse::extractors::{EmotionExtractor, SentimentExtractor};
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let assets = toy::write_toy_assets(dir.path(), 5)?;
    let emotion = EmotionExtractor::load(&assets.emotion)?;
    let sentiment = SentimentExtractor::load(&assets.sentiment)?;
    let texts = ["oh great , another monday", "the plot was good"];

    let emo = emotion.extract_emotion(&texts, 16)?;
    let sent = sentiment.extract_sentiment(&texts, 16)?;
    for ((text, e), s) in texts.iter().zip(&emo).zip(&sent) {
        let (top, score) = e
            .el
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty label set");
        let labels = sentiment.inner().labels();
        println!("{text:?}");
        println!("  emotion cls width {}, top {} ({score:.3})", e.u_cls.len(), emotion.inner().labels()[top]);
        println!("  sentiment {labels:?} = {:?}", s.sl);
    }
    println!("extractors frozen: {}", emotion.inner().is_inference() && sentiment.inner().is_inference());
    Ok(())
}
