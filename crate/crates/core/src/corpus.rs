//! Benchmark dataset ingestion, split/label accounting and length statistics.
//!
//! Every dataset is held as a [`DatasetBundle`] of train and test
//! [`Example`]s. The canonical on-disk form is a directory holding
//! `train.jsonl`, `test.jsonl` (one `{"id", "text", "label"}` object per line)
//! and a `manifest.json` with per-split per-label counts.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexical::WordTokenizer;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    SarcMovies,
    SarcTechnology,
    IacV2,
    Twitter,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] = [
        DatasetName::SarcMovies,
        DatasetName::SarcTechnology,
        DatasetName::IacV2,
        DatasetName::Twitter,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::SarcMovies => "sarc_movies",
            DatasetName::SarcTechnology => "sarc_technology",
            DatasetName::IacV2 => "iac_v2",
            DatasetName::Twitter => "twitter",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::config("dataset", format!("unknown dataset `{s}`")))
    }
}

/// Binary sarcasm label; the discriminant is the class index used everywhere
/// (logit position, metric tables, JSONL files).
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonSarcastic = 0,
    Sarcastic = 1,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::NonSarcastic, Label::Sarcastic];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::NonSarcastic),
            1 => Some(Label::Sarcastic),
            _ => None,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::NonSarcastic => Label::Sarcastic,
            Label::Sarcastic => Label::NonSarcastic,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::NonSarcastic => "non_sarcastic",
            Label::Sarcastic => "sarcastic",
        }
    }

    /// Accepts `0`/`1` (number or string) and the snake-case names.
    pub(crate) fn parse_value(value: &serde_json::Value) -> Option<Label> {
        match value {
            serde_json::Value::Number(n) => n.as_u64().and_then(|v| Label::from_index(v as usize)),
            serde_json::Value::String(s) => Label::parse_str(s),
            serde_json::Value::Bool(b) => Some(if *b { Label::Sarcastic } else { Label::NonSarcastic }),
            _ => None,
        }
    }

    pub(crate) fn parse_str(s: &str) -> Option<Label> {
        match s.trim() {
            "0" | "non_sarcastic" | "not_sarcastic" => Some(Label::NonSarcastic),
            "1" | "sarcastic" => Some(Label::Sarcastic),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::config("split", format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub dataset: DatasetName,
    pub split: Split,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub sarcastic: usize,
    pub non_sarcastic: usize,
}

impl LabelCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Sarcastic => self.sarcastic,
            Label::NonSarcastic => self.non_sarcastic,
        }
    }

    pub fn total(&self) -> usize {
        self.sarcastic + self.non_sarcastic
    }

    fn of(examples: &[Example]) -> Self {
        let sarcastic = examples.iter().filter(|e| e.label == Label::Sarcastic).count();
        LabelCounts {
            sarcastic,
            non_sarcastic: examples.len() - sarcastic,
        }
    }
}

/// Expected per-split per-label example counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub train: LabelCounts,
    pub test: LabelCounts,
}

impl Manifest {
    /// Published split sizes of the four benchmark corpora.
    pub fn published(name: DatasetName) -> Manifest {
        let counts = |s, n| LabelCounts {
            sarcastic: s,
            non_sarcastic: n,
        };
        match name {
            DatasetName::SarcMovies => Manifest {
                train: counts(2_533, 2_707),
                test: counts(641, 669),
            },
            DatasetName::SarcTechnology => Manifest {
                train: counts(2_738, 1_815),
                test: counts(677, 462),
            },
            DatasetName::IacV2 => Manifest {
                train: counts(2_616, 2_600),
                test: counts(644, 660),
            },
            DatasetName::Twitter => Manifest {
                train: counts(22_323, 25_785),
                test: counts(5_648, 6_379),
            },
        }
    }

    pub fn split(&self, split: Split) -> &LabelCounts {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut raw = serde_json::to_string_pretty(self)?;
        raw.push('\n');
        write_atomic(path, raw.as_bytes())
    }

    /// Checks `actual` against this manifest, reporting the first differing
    /// split/label cell.
    pub fn validate(&self, actual: &Manifest) -> Result<()> {
        for split in [Split::Train, Split::Test] {
            for label in [Label::Sarcastic, Label::NonSarcastic] {
                let expected = self.split(split).get(label);
                let found = actual.split(split).get(label);
                if expected != found {
                    return Err(Error::CountMismatch {
                        split,
                        label,
                        expected,
                        actual: found,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    Tsv,
}

impl Format {
    fn extension(&self) -> &'static str {
        match self {
            Format::Jsonl => "jsonl",
            Format::Tsv => "tsv",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::config("format", format!("unknown format `{other}`"))),
        }
    }
}

/// One dataset's train and test splits.
///
/// Reads of the test split go through [`DatasetBundle::test`], which counts
/// them; training code only ever calls [`DatasetBundle::train`], and the
/// counter lets tests prove it.
#[derive(Debug)]
pub struct DatasetBundle {
    name: DatasetName,
    train: Vec<Example>,
    test: Vec<Example>,
    manifest_counts: Option<Manifest>,
    test_reads: AtomicUsize,
}

impl Clone for DatasetBundle {
    fn clone(&self) -> Self {
        DatasetBundle {
            name: self.name,
            train: self.train.clone(),
            test: self.test.clone(),
            manifest_counts: self.manifest_counts,
            test_reads: AtomicUsize::new(0),
        }
    }
}

impl DatasetBundle {
    pub fn new(name: DatasetName, train: Vec<Example>, test: Vec<Example>) -> Result<Self> {
        let train_ids: HashSet<&str> = train.iter().map(|e| e.id.as_str()).collect();
        if let Some(dup) = test.iter().find(|e| train_ids.contains(e.id.as_str())) {
            return Err(Error::DuplicateId(dup.id.clone()));
        }
        Ok(DatasetBundle {
            name,
            train,
            test,
            manifest_counts: None,
            test_reads: AtomicUsize::new(0),
        })
    }

    pub fn name(&self) -> DatasetName {
        self.name
    }

    pub fn train(&self) -> &[Example] {
        &self.train
    }

    /// Test split access; every call is counted.
    pub fn test(&self) -> &[Example] {
        self.test_reads.fetch_add(1, Ordering::Relaxed);
        &self.test
    }

    /// Number of times [`DatasetBundle::test`] has been called.
    pub fn test_reads(&self) -> usize {
        self.test_reads.load(Ordering::Relaxed)
    }

    pub fn manifest_counts(&self) -> Option<&Manifest> {
        self.manifest_counts.as_ref()
    }

    /// Observed per-split per-label counts.
    pub fn counts(&self) -> Manifest {
        Manifest {
            train: LabelCounts::of(&self.train),
            test: LabelCounts::of(&self.test),
        }
    }

    pub fn with_manifest(mut self, manifest: &Manifest) -> Result<Self> {
        manifest.validate(&self.counts())?;
        self.manifest_counts = Some(*manifest);
        Ok(self)
    }

    /// Writes `train.jsonl`, `test.jsonl` and `manifest.json` (observed
    /// counts) into `dir`.
    pub fn write_jsonl(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (split, examples) in [(Split::Train, &self.train), (Split::Test, &self.test)] {
            let mut buf = Vec::new();
            for e in examples.iter() {
                let record = CanonicalRecord {
                    id: &e.id,
                    text: &e.text,
                    label: e.label.index() as u8,
                };
                serde_json::to_writer(&mut buf, &record)?;
                buf.push(b'\n');
            }
            write_atomic(&dir.join(format!("{split}.jsonl")), &buf)?;
        }
        self.counts().write(&dir.join("manifest.json"))
    }

    /// Seeded subsample of `n_train` train and `n_test` test examples, each
    /// kept in original relative order.
    pub fn subsample(&self, n_train: usize, n_test: usize, seed: u64) -> Result<DatasetBundle> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = |xs: &[Example], n: usize| -> Result<Vec<Example>> {
            if n > xs.len() {
                return Err(Error::Contract(format!(
                    "cannot subsample {n} examples from {}",
                    xs.len()
                )));
            }
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.shuffle(&mut rng);
            let mut chosen = idx[..n].to_vec();
            chosen.sort_unstable();
            Ok(chosen.into_iter().map(|i| xs[i].clone()).collect())
        };
        let train = pick(&self.train, n_train)?;
        let test = pick(&self.test, n_test)?;
        DatasetBundle::new(self.name, train, test)
    }
}

#[derive(Serialize)]
struct CanonicalRecord<'a> {
    id: &'a str,
    text: &'a str,
    label: u8,
}

#[derive(Deserialize)]
struct JsonRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    label: Option<serde_json::Value>,
    split: Option<String>,
}

/// Loads a dataset.
///
/// `path` is either a directory holding `train.<ext>` and `test.<ext>` (a
/// missing file is an empty split), or a single file whose records may carry
/// a split (`"split"` field for JSONL, optional third column for TSV) and
/// otherwise default to train. TSV rows are `text<TAB>label[<TAB>split]`.
pub fn load_dataset(
    path: &Path,
    format: Format,
    name: DatasetName,
    manifest: Option<&Manifest>,
) -> Result<DatasetBundle> {
    let (train, test) = if path.is_dir() {
        let mut splits = Vec::new();
        for split in [Split::Train, Split::Test] {
            let file = path.join(format!("{split}.{}", format.extension()));
            let examples = if file.exists() {
                read_examples(&file, format, name, split)?
            } else {
                Vec::new()
            };
            if let Some(e) = examples.iter().find(|e| e.split != split) {
                return Err(Error::Parse {
                    path: file,
                    line: 0,
                    message: format!("record `{}` declares split {} inside the {split} file", e.id, e.split),
                });
            }
            splits.push(examples);
        }
        let test = splits.pop().unwrap_or_default();
        let train = splits.pop().unwrap_or_default();
        (train, test)
    } else {
        let all = read_examples(path, format, name, Split::Train)?;
        all.into_iter().partition(|e| e.split == Split::Train)
    };
    let bundle = DatasetBundle::new(name, train, test)?;
    match manifest {
        Some(m) => bundle.with_manifest(m),
        None => Ok(bundle),
    }
}

/// Loads a canonical dataset directory, validating it against its own
/// `manifest.json` when one is present.
pub fn load_canonical(dir: &Path, name: DatasetName) -> Result<DatasetBundle> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let manifest_path = dir.join("manifest.json");
    let manifest = if manifest_path.exists() {
        Some(Manifest::read(&manifest_path)?)
    } else {
        None
    };
    load_dataset(dir, Format::Jsonl, name, manifest.as_ref())
}

fn read_examples(path: &Path, format: Format, name: DatasetName, default_split: Split) -> Result<Vec<Example>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match format {
            Format::Jsonl => parse_json_line(&line, path, line_no, name, default_split)?,
            Format::Tsv => {
                if line_no == 1 && line.to_ascii_lowercase().starts_with("text\tlabel") {
                    continue;
                }
                parse_tsv_line(&line, path, line_no, name, default_split)?
            }
        };
        out.push(parsed);
    }
    Ok(out)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn checked_text(text: String, path: &Path, line: usize) -> Result<String> {
    if text.trim().is_empty() {
        return Err(parse_error(path, line, "text is empty"));
    }
    Ok(text)
}

fn default_id(name: DatasetName, split: Split, line: usize) -> String {
    format!("{name}-{split}-{line}")
}

fn parse_json_line(line: &str, path: &Path, line_no: usize, name: DatasetName, default_split: Split) -> Result<Example> {
    let record: JsonRecord =
        serde_json::from_str(line).map_err(|e| parse_error(path, line_no, e.to_string()))?;
    let text = record
        .text
        .ok_or_else(|| parse_error(path, line_no, "missing `text` field"))?;
    let raw_label = record
        .label
        .ok_or_else(|| parse_error(path, line_no, "missing `label` field"))?;
    let label = Label::parse_value(&raw_label).ok_or_else(|| Error::Label {
        path: path.to_path_buf(),
        line: line_no,
        value: raw_label.to_string(),
    })?;
    let split = match record.split {
        Some(s) => s.parse().map_err(|_| parse_error(path, line_no, format!("unknown split `{s}`")))?,
        None => default_split,
    };
    let id = match record.id {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(other) => return Err(parse_error(path, line_no, format!("unsupported id value {other}"))),
        None => default_id(name, split, line_no),
    };
    Ok(Example {
        id,
        text: checked_text(text, path, line_no)?,
        label,
        dataset: name,
        split,
    })
}

fn parse_tsv_line(line: &str, path: &Path, line_no: usize, name: DatasetName, default_split: Split) -> Result<Example> {
    let fields: Vec<&str> = line.split('\t').collect();
    // Text may itself contain tabs; label (and optional split) are trailing.
    let (text, label, split) = match fields.len() {
        0 | 1 => return Err(parse_error(path, line_no, "expected `text<TAB>label`")),
        _ => {
            let last = fields[fields.len() - 1];
            if fields.len() >= 3 && last.trim().parse::<Split>().is_ok() {
                let split = last.trim().parse::<Split>()?;
                (fields[..fields.len() - 2].join("\t"), fields[fields.len() - 2], split)
            } else {
                (fields[..fields.len() - 1].join("\t"), last, default_split)
            }
        }
    };
    let label = Label::parse_str(label).ok_or_else(|| Error::Label {
        path: path.to_path_buf(),
        line: line_no,
        value: label.to_string(),
    })?;
    Ok(Example {
        id: default_id(name, split, line_no),
        text: checked_text(text, path, line_no)?,
        label,
        dataset: name,
        split,
    })
}

/// Concatenates the train splits of `bundles` in the given order. Test
/// examples are never included.
pub fn merge_training_corpora(bundles: &[DatasetBundle]) -> Result<Vec<Example>> {
    if bundles.is_empty() {
        return Err(Error::EmptyCorpus("no bundles to merge".into()));
    }
    Ok(bundles.iter().flat_map(|b| b.train().iter().cloned()).collect())
}

/// Word-count statistics of a corpus.
///
/// Both dispersion readings are kept: `variance` and `std_dev` (population,
/// i.e. divided by the count).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub max: usize,
    pub min: usize,
}

pub fn compute_length_stats(examples: &[Example], tokenizer: &WordTokenizer) -> Result<LengthStats> {
    let lengths: Vec<usize> = examples.iter().map(|e| tokenizer.tokenize(&e.text).len()).collect();
    length_stats_from_counts(&lengths)
}

/// Statistics over precomputed word counts. The median of an even-sized list
/// is its lower middle element.
pub fn length_stats_from_counts(lengths: &[usize]) -> Result<LengthStats> {
    if lengths.is_empty() {
        return Err(Error::EmptyCorpus("cannot compute length statistics".into()));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let median = sorted[(n - 1) / 2] as f64;
    let mean = sorted.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
    let variance = sorted.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(LengthStats {
        count: n,
        median,
        mean,
        variance,
        std_dev: variance.sqrt(),
        max: sorted[n - 1],
        min: sorted[0],
    })
}

/// Length statistics of one dataset under both the train-only and the
/// train+test reading.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatsReport {
    pub dataset: DatasetName,
    pub train: LengthStats,
    pub train_and_test: LengthStats,
}

pub fn stats_report(bundle: &DatasetBundle, tokenizer: &WordTokenizer) -> Result<StatsReport> {
    let train = compute_length_stats(bundle.train(), tokenizer)?;
    let all: Vec<Example> = bundle.train().iter().chain(bundle.test()).cloned().collect();
    let train_and_test = compute_length_stats(&all, tokenizer)?;
    Ok(StatsReport {
        dataset: bundle.name(),
        train,
        train_and_test,
    })
}

/// Per-label counts keyed by split, for human-readable summaries.
pub fn count_table(bundle: &DatasetBundle) -> BTreeMap<String, LabelCounts> {
    let counts = bundle.counts();
    BTreeMap::from([("test".to_string(), counts.test), ("train".to_string(), counts.train)])
}

/// Write-then-rename so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = tmp_sibling(path);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}
