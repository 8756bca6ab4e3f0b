//! Ingest a raw TSV corpus into the canonical layout, validate it against a
//! count manifest and print word-length statistics.

use std::io::Write;

use sarcfuse::corpus::{load_canonical, load_dataset, stats_report, DatasetName, Format};
use sarcfuse::lexical::WordTokenizer;
use sarcfuse::toy;

fn main() -> sarcfuse::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let raw = dir.path().join("raw.tsv");
    let toy = toy::toy_corpus(DatasetName::Twitter, 40, 10, 7)?;
    let mut f = std::fs::File::create(&raw).expect("raw file");
    writeln!(f, "text\tlabel\tsplit").expect("write");
    for e in toy.train().iter().chain(toy.test()) {
        writeln!(f, "{}\t{}\t{}", e.text, e.label.index(), e.split).expect("write");
    }
    drop(f);

    // validating against the counts we expect; a mismatch aborts ingestion
    let expected = toy.counts();
    let bundle = load_dataset(&raw, Format::Tsv, DatasetName::Twitter, Some(&expected))?;
    let out = dir.path().join("twitter");
    bundle.write_jsonl(&out)?;

    let reloaded = load_canonical(&out, DatasetName::Twitter)?;
    let report = stats_report(&reloaded, &WordTokenizer)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
