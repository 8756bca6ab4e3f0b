//! The `sarcfuse` command line: one subcommand per pipeline stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineKind};
use crate::config::TrainConfig;
use crate::corpus::{
    count_table, load_canonical, load_dataset, merge_training_corpora, stats_report, write_atomic, DatasetName, Format,
    Label, Manifest,
};
use crate::error::{Error, Result};
use crate::evalkit::{render_results_table, score, RunReport};
use crate::fusion::{load_extractors, train_fused, FusedModel};
use crate::lexical::WordTokenizer;
use crate::sarc_encoder::mlm_pretrain;
use crate::training::predict_labels;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "sarcfuse", version, about = "Sarcasm detection by multi-branch feature fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw corpus into canonical JSONL plus a count manifest.
    Ingest(IngestArgs),
    /// Word-length statistics of a canonical dataset.
    Stats(StatsArgs),
    /// Masked-LM adaptation of the base encoder.
    Pretrain(PretrainArgs),
    /// Train the fused model.
    Train(TrainArgs),
    /// Score a checkpoint on its dataset's test split.
    Eval(EvalArgs),
    /// Classify texts with a checkpoint; one JSON line per text.
    Predict(PredictArgs),
    /// Train and score a baseline.
    Baseline(BaselineArgs),
    /// Merge run reports into a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset, when no config file is given.
    #[arg(long)]
    pub dataset: Option<DatasetName>,
    /// `dotted.key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<TrainConfig> {
        let mut overrides = Vec::new();
        if let Some(d) = self.dataset {
            overrides.push(format!("dataset={d}"));
        }
        overrides.extend(self.overrides.iter().cloned());
        match &self.config {
            Some(path) => TrainConfig::from_file(path, &overrides),
            None if self.dataset.is_some() => TrainConfig::from_toml_str("", &overrides),
            None => Err(Error::config("config", "pass --config or --dataset")),
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub format: Format,
    #[arg(long)]
    pub dataset: DatasetName,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Root directory; the dataset lands in `<out>/<dataset>/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Expected counts to validate against.
    #[arg(long, conflicts_with = "published")]
    pub manifest: Option<PathBuf>,
    /// Validate against the published counts for the dataset.
    #[arg(long)]
    pub published: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: DatasetName,
    /// Canonical dataset directory; defaults to `data/<dataset>`.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Canonical dataset directories whose train splits form the corpus.
    #[arg(long = "data")]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to the checkpoint's configured data directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Defaults to the checkpoint directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, required = true)]
    pub text: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub kind: BaselineKind,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Prediction file for the external kind.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Provenance record written into every run's output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` pins both.
    pub started_at: u64,
    pub finished_at: u64,
    pub version: String,
    pub output_dir: PathBuf,
}

fn now() -> u64 {
    if let Some(pinned) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return pinned;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct RunStamp {
    command: &'static str,
    config_path: Option<PathBuf>,
    seed: Option<u64>,
    started_at: u64,
}

impl RunStamp {
    fn start(command: &'static str, config_path: Option<&Path>, seed: Option<u64>) -> Self {
        RunStamp {
            command,
            config_path: config_path.map(Path::to_path_buf),
            seed,
            started_at: now(),
        }
    }

    fn finish(self, out: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config_path: self.config_path,
            seed: self.seed,
            started_at: self.started_at,
            finished_at: now(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            output_dir: out.to_path_buf(),
        };
        write_atomic(&out.join(RUN_MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Pretrain(a) => pretrain(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Baseline(a) => baseline(a),
        Command::Report(a) => report(a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let stamp = RunStamp::start("ingest", None, None);
    let expected = match (&a.manifest, a.published) {
        (Some(p), _) => Some(Manifest::read(p)?),
        (None, true) => Some(Manifest::published(a.dataset)),
        (None, false) => None,
    };
    let bundle = load_dataset(&a.input, a.format, a.dataset, expected.as_ref())?;
    let out = a.out.join(a.dataset.as_str());
    bundle.write_jsonl(&out)?;
    println!("{}", serde_json::to_string(&count_table(&bundle))?);
    stamp.finish(&out)
}

fn stats(a: StatsArgs) -> Result<()> {
    let stamp = RunStamp::start("stats", None, None);
    let dir = a.data_dir.unwrap_or_else(|| PathBuf::from("data").join(a.dataset.as_str()));
    let bundle = load_canonical(&dir, a.dataset)?;
    let report = stats_report(&bundle, &WordTokenizer)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = a.out {
        write_json(&out.join("stats.json"), &report)?;
        stamp.finish(&out)?;
    }
    Ok(())
}

fn pretrain(a: PretrainArgs) -> Result<()> {
    let config = a.config.load()?;
    let stamp = RunStamp::start("pretrain", a.config.config.as_deref(), Some(config.mlm.seed));
    let dirs: Vec<(PathBuf, DatasetName)> = if !a.data.is_empty() {
        a.data
            .iter()
            .map(|d| Ok((d.clone(), infer_dataset(d)?)))
            .collect::<Result<_>>()?
    } else if config.mlm.shared {
        let root = config.data_dir.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        DatasetName::ALL
            .iter()
            .map(|d| (root.join(d.as_str()), *d))
            .filter(|(p, _)| p.is_dir())
            .collect()
    } else {
        vec![(config.data_dir.clone(), config.dataset)]
    };
    let bundles = dirs.iter().map(|(p, d)| load_canonical(p, *d)).collect::<Result<Vec<_>>>()?;
    let corpus = merge_training_corpora(&bundles)?;
    let report = mlm_pretrain(&corpus, &config.assets.sarc_encoder, &a.out, &config.mlm)?;
    write_json(&a.out.join("mlm_report.json"), &report)?;
    eprintln!(
        "pretrained on {} texts; epoch losses {:?}",
        corpus.len(),
        report.epoch_losses
    );
    stamp.finish(&a.out)
}

/// Dataset name from the final path component of a canonical directory.
fn infer_dataset(dir: &Path) -> Result<DatasetName> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::config("data", format!("cannot infer dataset from {}", dir.display())))?
        .parse()
}

fn train(a: TrainArgs) -> Result<()> {
    let config = a.config.load()?;
    let stamp = RunStamp::start("train", a.config.config.as_deref(), Some(config.seed));
    let bundle = load_canonical(&config.data_dir, config.dataset)?;
    let (emotion, sentiment) = load_extractors(&config)?;
    let trained = train_fused(&bundle, &config, emotion, sentiment, Some(&a.out))?;
    let last = trained.outcome.history.last();
    eprintln!(
        "trained {} epochs ({} steps); best epoch {}; final train loss {:.4}",
        trained.outcome.history.len(),
        trained.outcome.steps,
        trained.outcome.best_epoch,
        last.map_or(f64::NAN, |r| r.train_loss)
    );
    stamp.finish(&a.out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let config = FusedModel::checkpoint_config(&a.checkpoint)?;
    let stamp = RunStamp::start("eval", Some(&a.checkpoint.join("config.snapshot")), Some(config.seed));
    let (emotion, sentiment) = load_extractors(&config)?;
    let model = FusedModel::load(&a.checkpoint, emotion, sentiment)?;
    let data_dir = a.data_dir.unwrap_or_else(|| config.data_dir.clone());
    let bundle = load_canonical(&data_dir, config.dataset)?;
    let test = bundle.test();
    let texts: Vec<&str> = test.iter().map(|e| e.text.as_str()).collect();
    let gold: Vec<Label> = test.iter().map(|e| e.label).collect();
    let metrics = score(&predict_labels(&model, &texts)?, &gold)?;
    let out = a.out.unwrap_or_else(|| a.checkpoint.clone());
    let report = RunReport {
        dataset: config.dataset.as_str().to_string(),
        model: "fused".to_string(),
        metrics,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    println!("{}", serde_json::to_string(&report)?);
    stamp.finish(&out)
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    text: &'a str,
    label: Label,
    probabilities: BTreeMap<&'static str, f64>,
}

fn predict(a: PredictArgs) -> Result<()> {
    let config = FusedModel::checkpoint_config(&a.checkpoint)?;
    let (emotion, sentiment) = load_extractors(&config)?;
    let model = FusedModel::load(&a.checkpoint, emotion, sentiment)?;
    let texts: Vec<&str> = a.text.iter().map(String::as_str).collect();
    for (text, p) in texts.iter().zip(model.predict(&texts)?) {
        let line = PredictionLine {
            text,
            label: p.predicted_label,
            probabilities: Label::ALL.iter().map(|l| (l.as_str(), p.probs[l.index()])).collect(),
        };
        println!("{}", serde_json::to_string(&line)?);
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let mut config = a.config.load()?;
    if let Some(p) = &a.predictions {
        let table = config
            .baseline
            .entry(BaselineKind::External.as_str())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = table {
            t.insert("predictions".into(), toml::Value::String(p.display().to_string()));
        }
    }
    let stamp = RunStamp::start("baseline", a.config.config.as_deref(), Some(config.seed));
    let bundle = load_canonical(&config.data_dir, config.dataset)?;
    let report = run_baseline(a.kind, &bundle, &config)?;
    write_json(&a.out.join(REPORT_FILE), &report)?;
    println!("{}", serde_json::to_string(&report)?);
    stamp.finish(&a.out)
}

fn report(a: ReportArgs) -> Result<()> {
    let stamp = RunStamp::start("report", None, None);
    let mut reports = BTreeMap::new();
    for path in &a.runs {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let run: RunReport = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        reports.insert((run.dataset, run.model), run.metrics);
    }
    let table = render_results_table(&reports);
    write_atomic(&a.out.join("results.csv"), table.to_csv()?.as_bytes())?;
    write_atomic(&a.out.join("results.txt"), table.to_string().as_bytes())?;
    print!("{table}");
    stamp.finish(&a.out)
}
