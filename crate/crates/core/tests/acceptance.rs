//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Criteria 1-9 run on the toy fixtures. Criteria 10-14 need the public
//! corpora and pretrained assets and are skipped unless these are set:
//!
//! - `SARCFUSE_DATA_ROOT`: directory holding canonical `<dataset>/` dirs
//! - `SARCFUSE_ASSETS_DIR`: directory laid out like the default `assets/`
//! - `SARCFUSE_FULL_SCALE=1`: additionally run full-scale fused training

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcfuse::baselines::{run_baseline, BaselineKind};
use sarcfuse::config::{AssetPaths, TrainConfig};
use sarcfuse::corpus::{load_canonical, stats_report, DatasetName, Label, Manifest};
use sarcfuse::evalkit::score;
use sarcfuse::extractors::{assert_frozen, EmotionExtractor, SentimentExtractor, EMOTION_LABELS};
use sarcfuse::fusion::{train_fused, FusedModel, FusionConfig};
use sarcfuse::lexical::{build_vocabulary, load_embeddings, PorterStemmer, Provenance, WordTokenizer};
use sarcfuse::nn::Mode;
use sarcfuse::sarc_encoder::{mlm_pretrain, MlmConfig};
use sarcfuse::toy;
use sarcfuse::training::{fit, predict_labels};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Outcome = Result<Verdict, String>;

fn check(ok: bool, detail: String) -> Outcome {
    Ok(if ok { Verdict::Pass(detail) } else { Verdict::Fail(detail) })
}

fn extractors(assets: &toy::ToyAssets) -> (Arc<EmotionExtractor>, Arc<SentimentExtractor>) {
    (
        Arc::new(EmotionExtractor::load(&assets.emotion).unwrap()),
        Arc::new(SentimentExtractor::load(&assets.sentiment).unwrap()),
    )
}

fn freeze_invariant() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (assets, bundle) = common::toy_setup(dir.path(), 11, 16, 4);
    let config = toy::toy_train_config(&assets, bundle.name(), dir.path());
    let (emo, sent) = extractors(&assets);
    let model = FusedModel::build(&config, bundle.train(), emo.clone(), sent.clone()).unwrap();
    let groups = ["sarc_encoder.", "cnn.", "fusion.proj_", "fusion.head_"];
    let before: Vec<String> = groups.iter().map(|g| model.store().checksum(g).unwrap()).collect();
    let (emo_before, sent_before) = (emo.inner().checksum().unwrap(), sent.inner().checksum().unwrap());

    let mut fc = config.fit_config();
    fc.val_fraction = 0.0;
    fc.batch_size = 4;
    fc.max_steps = Some(5);
    let outcome = fit(&model, bundle.train(), &fc).unwrap();

    let frozen_same = emo.inner().checksum().unwrap() == emo_before
        && sent.inner().checksum().unwrap() == sent_before
        && assert_frozen(emo.inner())
        && assert_frozen(sent.inner());
    let changed: Vec<bool> = groups
        .iter()
        .zip(&before)
        .map(|(g, b)| model.store().checksum(g).unwrap() != *b)
        .collect();
    check(
        outcome.steps == 5 && frozen_same && changed.iter().all(|&c| c) && bundle.test_reads() == 0,
        format!(
            "steps {}, extractors unchanged {frozen_same}, trainable groups changed {changed:?}, test reads {}",
            outcome.steps,
            bundle.test_reads()
        ),
    )
}

fn simplex_checks() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (assets, bundle) = common::toy_setup(dir.path(), 12, 16, 4);
    let config = toy::toy_train_config(&assets, bundle.name(), dir.path());
    let (emo, sent) = extractors(&assets);
    let model = FusedModel::build(&config, bundle.train(), emo.clone(), sent.clone()).unwrap();
    let texts = common::random_texts(100, 5);
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let sl_err = sent
        .extract_sentiment(&refs, config.max_length)
        .unwrap()
        .iter()
        .map(|f| (f.sl.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let emotions = emo.extract_emotion(&refs, config.max_length).unwrap();
    let el_ok = emotions
        .iter()
        .all(|f| f.el.len() == EMOTION_LABELS && f.el.iter().all(|v| (0.0..=1.0).contains(v)));
    let prob_err = model
        .predict(&refs)
        .unwrap()
        .iter()
        .map(|p| (p.probs[0] + p.probs[1] - 1.0).abs())
        .fold(0.0, f64::max);
    check(
        sl_err <= 1e-6 && prob_err <= 1e-6 && el_ok && emotions.len() == 100,
        format!("max |sum sl - 1| {sl_err:.2e}, max |sum probs - 1| {prob_err:.2e}, emotion scores 28-dim in [0,1] {el_ok}"),
    )
}

fn shape_chain() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (assets, bundle) = common::toy_setup(dir.path(), 13, 16, 4);
    let mut config = toy::toy_train_config(&assets, bundle.name(), dir.path());
    config.fusion = FusionConfig::default();
    config.cnn.filters_per_size = 100;
    config.cnn.filter_sizes = vec![3, 4, 5];
    let (emo, sent) = extractors(&assets);
    let model = FusedModel::build(&config, bundle.train(), emo, sent).unwrap();
    let texts = ["oh great another meeting", "the plot was good"];
    let inputs = model.branch_inputs(&texts, Mode::Eval).unwrap();
    let (rep, _) = model.fused_forward(&texts, Mode::Eval).unwrap();
    let words = model.cnn().config().max_words;
    let idx: Vec<Vec<u32>> = texts
        .iter()
        .map(|t| sarcfuse::lexical::encode_for_cnn(t, model.vocabulary(), words))
        .collect();
    let gathered = model.cnn().gather(&model.cnn().index_tensor(&idx).unwrap()).unwrap();
    let (z, c, g) = (rep.z.dims().to_vec(), inputs.c.dims().to_vec(), gathered.dims().to_vec());
    check(
        config.fusion.projection_dim == 128 && z == [2, 640] && c == [2, 300] && g == [2, words, 300],
        format!("z {z:?}, cnn output {c:?}, gathered embeddings {g:?}"),
    )
}

fn gradient_checks() -> Outcome {
    let (fusion_worst, fusion_n) = common::fusion_gradient_check(3);
    let (cnn_worst, cnn_n) = common::cnn_gradient_check(4);
    check(
        fusion_worst <= 1.0 && cnn_worst <= 1.0 && fusion_n > 0 && cnn_n > 0,
        format!(
            "fusion {fusion_n} entries worst ratio {fusion_worst:.3}, cnn filters {cnn_n} entries worst ratio {cnn_worst:.3} (rtol 1e-4)"
        ),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draw = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { Label::Sarcastic } else { Label::NonSarcastic };
    let mut worst = 0.0f64;
    let mut symmetric = true;
    let mut trials = 0;
    let mut lengths = vec![1000];
    lengths.extend((0..49).map(|_| rng.gen_range(1..200)));
    for n in lengths {
        let preds: Vec<Label> = (0..n).map(|_| draw(&mut rng)).collect();
        let gold: Vec<Label> = (0..n).map(|_| draw(&mut rng)).collect();
        let got = score(&preds, &gold).unwrap();
        let want = common::brute_force(&preds, &gold);
        worst = worst.max(common::max_metric_gap(&got, &want));
        let flipped = score(
            &preds.iter().map(|l| l.flipped()).collect::<Vec<_>>(),
            &gold.iter().map(|l| l.flipped()).collect::<Vec<_>>(),
        )
        .unwrap();
        symmetric &= flipped.accuracy == got.accuracy
            && (flipped.f1_macro - got.f1_macro).abs() <= 1e-15
            && flipped.class(Label::Sarcastic) == got.class(Label::NonSarcastic)
            && flipped.class(Label::NonSarcastic) == got.class(Label::Sarcastic);
        trials += 1;
    }
    check(
        worst <= 1e-12 && symmetric,
        format!("{trials} random label sets (first of 1000 pairs), worst gap {worst:.1e}, swap symmetry {symmetric}"),
    )
}

fn overfit_capacity() -> Outcome {
    let mut accs = Vec::new();
    for seed in [1u64, 2, 3] {
        let dir = tempfile::tempdir().unwrap();
        let (assets, bundle) = common::toy_setup(dir.path(), 20 + seed, 32, 4);
        let mut config = toy::toy_train_config(&assets, bundle.name(), dir.path());
        config.seed = seed;
        config.max_epochs = 30;
        config.val_fraction = 0.0;
        let (emo, sent) = extractors(&assets);
        let trained = train_fused(&bundle, &config, emo, sent, None).unwrap();
        let texts: Vec<&str> = bundle.train().iter().map(|e| e.text.as_str()).collect();
        let gold: Vec<Label> = bundle.train().iter().map(|e| e.label).collect();
        accs.push(score(&predict_labels(&trained.model, &texts).unwrap(), &gold).unwrap().accuracy);
    }
    check(accs.iter().all(|&a| a >= 0.95), format!("train accuracy after 30 epochs, seeds 1-3: {accs:?}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (assets, bundle) = common::toy_setup(dir.path(), 30, 16, 4);
    let mut config = toy::toy_train_config(&assets, bundle.name(), dir.path());
    config.max_epochs = 3;
    let run = || {
        let (emo, sent) = extractors(&assets);
        let t = train_fused(&bundle, &config, emo, sent, None).unwrap();
        t.outcome.history.iter().map(|r| r.train_loss).collect::<Vec<f64>>()
    };
    let (a, b) = (run(), run());
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    check(a.len() == b.len() && gap <= 1e-6, format!("epoch losses {a:?}, max gap {gap:.1e}"))
}

fn embedding_fallback() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (assets, bundle) = common::toy_setup(dir.path(), 40, 64, 4);
    let vocab = build_vocabulary(bundle.train()).unwrap();
    let a = load_embeddings(&vocab, &assets.vectors_300, 300, &PorterStemmer, 9).unwrap();
    let b = load_embeddings(&vocab, &assets.vectors_300, 300, &PorterStemmer, 9).unwrap();
    let c = load_embeddings(&vocab, &assets.vectors_300, 300, &PorterStemmer, 10).unwrap();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in a.provenances() {
        *counts.entry(format!("{p:?}")).or_default() += 1;
    }
    let all_paths = [Provenance::Pretrained, Provenance::StemmedFallback, Provenance::Random]
        .iter()
        .all(|p| a.provenances().contains(p));
    let random_rows_differ = (0..a.rows()).any(|i| a.provenance(i) == Provenance::Random && a.row(i) != c.row(i));
    check(
        all_paths && a == b && random_rows_differ,
        format!("provenance counts {counts:?}, same seed identical {}, new seed changes random rows {random_rows_differ}", a == b),
    )
}

fn mlm_sanity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (assets, bundle) = common::toy_setup(dir.path(), 50, 64, 0);
    let cfg = MlmConfig {
        epochs: 24,
        batch_size: 16,
        learning_rate: 1e-3,
        max_length: 16,
        ..MlmConfig::default()
    };
    let report = mlm_pretrain(bundle.train(), &assets.sarc_base, &dir.path().join("mlm"), &cfg).unwrap();
    let (first, last) = (report.epoch_losses[0], *report.epoch_losses.last().unwrap());
    let rate = report.mask_rate();
    check(
        last < first && report.eligible_tokens >= 10_000 && (rate - cfg.mask_probability).abs() <= 0.02,
        format!(
            "epoch loss {first:.3} -> {last:.3}, mask rate {rate:.4} over {} eligible tokens",
            report.eligible_tokens
        ),
    )
}

fn data_root() -> Option<PathBuf> {
    std::env::var_os("SARCFUSE_DATA_ROOT").map(PathBuf::from).filter(|p| p.is_dir())
}

fn assets_dir() -> Option<PathBuf> {
    std::env::var_os("SARCFUSE_ASSETS_DIR").map(PathBuf::from).filter(|p| p.is_dir())
}

fn real_assets(root: &std::path::Path) -> AssetPaths {
    let d = AssetPaths::default();
    let under = |p: &std::path::Path| root.join(p.file_name().unwrap());
    AssetPaths {
        sarc_encoder: under(&d.sarc_encoder),
        emotion: under(&d.emotion),
        sentiment: under(&d.sentiment),
        word_vectors: under(&d.word_vectors),
        nbow_vectors: under(&d.nbow_vectors),
    }
}

fn present_datasets(root: &std::path::Path) -> Vec<DatasetName> {
    DatasetName::ALL.into_iter().filter(|d| root.join(d.as_str()).is_dir()).collect()
}

fn table1_counts() -> Outcome {
    let Some(root) = data_root() else {
        return Ok(Verdict::Skip("SARCFUSE_DATA_ROOT not set".into()));
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for d in present_datasets(&root) {
        let bundle = load_canonical(&root.join(d.as_str()), d).map_err(|e| e.to_string())?;
        match bundle.with_manifest(&Manifest::published(d)) {
            Ok(_) => lines.push(format!("{d} ok")),
            Err(e) => {
                ok = false;
                lines.push(format!("{d}: {e}"));
            }
        }
    }
    if lines.is_empty() {
        return Ok(Verdict::Skip("no dataset directories under SARCFUSE_DATA_ROOT".into()));
    }
    check(ok, lines.join("; "))
}

/// (median, mean, dispersion, max, min).
fn table4(d: DatasetName) -> (f64, f64, f64, usize, usize) {
    match d {
        DatasetName::SarcMovies => (10.0, 12.24, 8.81, 138, 1),
        DatasetName::SarcTechnology => (12.0, 13.88, 9.33, 103, 1),
        DatasetName::IacV2 => (39.0, 50.63, 36.05, 212, 10),
        DatasetName::Twitter => (17.0, 17.61, 6.26, 64, 1),
    }
}

fn table4_stats() -> Outcome {
    let Some(root) = data_root() else {
        return Ok(Verdict::Skip("SARCFUSE_DATA_ROOT not set".into()));
    };
    let tok = WordTokenizer;
    let mut lines = Vec::new();
    let mut ok = true;
    for d in present_datasets(&root) {
        let bundle = load_canonical(&root.join(d.as_str()), d).map_err(|e| e.to_string())?;
        let r = stats_report(&bundle, &tok).map_err(|e| e.to_string())?;
        let (median, mean, disp, max, min) = table4(d);
        let readings = [r.train, r.train_and_test];
        let exact = readings.iter().any(|s| s.median == median && s.max == max && s.min == min);
        let mean_ok = readings.iter().any(|s| (s.mean - mean).abs() <= 0.5);
        let disp_ok = readings
            .iter()
            .any(|s| (s.std_dev - disp).abs() <= 0.5 || (s.variance - disp).abs() <= 0.5);
        ok &= exact && mean_ok && disp_ok;
        lines.push(format!(
            "{d}: median/max/min {exact}, mean {mean_ok} ({:.2}/{:.2}), dispersion {disp_ok} (sd {:.2}/{:.2})",
            r.train.mean, r.train_and_test.mean, r.train.std_dev, r.train_and_test.std_dev
        ));
    }
    if lines.is_empty() {
        return Ok(Verdict::Skip("no dataset directories under SARCFUSE_DATA_ROOT".into()));
    }
    check(ok, lines.join("; "))
}

fn published_f1(d: DatasetName, model: &str) -> f64 {
    let idx = DatasetName::ALL.iter().position(|x| *x == d).unwrap();
    match model {
        "nbow" => [0.60, 0.64, 0.71, 0.75][idx],
        _ => [0.73, 0.80, 0.85, 0.93][idx],
    }
}

fn nbow_full_scale() -> Outcome {
    let (Some(root), Some(assets)) = (data_root(), assets_dir()) else {
        return Ok(Verdict::Skip("SARCFUSE_DATA_ROOT and SARCFUSE_ASSETS_DIR not both set".into()));
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for d in present_datasets(&root) {
        let mut config = TrainConfig::for_dataset(d);
        config.assets = real_assets(&assets);
        let bundle = load_canonical(&root.join(d.as_str()), d).map_err(|e| e.to_string())?;
        let report = run_baseline(BaselineKind::Nbow, &bundle, &config).map_err(|e| e.to_string())?;
        let f1 = report.metrics.f1_macro;
        let target = published_f1(d, "nbow");
        ok &= (f1 - target).abs() <= 0.05;
        lines.push(format!("{d}: f1 {f1:.3} vs {target:.2}"));
    }
    if lines.is_empty() {
        return Ok(Verdict::Skip("no dataset directories under SARCFUSE_DATA_ROOT".into()));
    }
    check(ok, lines.join("; "))
}

fn fused_full_scale() -> Outcome {
    let (Some(root), Some(assets)) = (data_root(), assets_dir()) else {
        return Ok(Verdict::Skip("SARCFUSE_DATA_ROOT and SARCFUSE_ASSETS_DIR not both set".into()));
    };
    if std::env::var("SARCFUSE_FULL_SCALE").as_deref() != Ok("1") {
        return Ok(Verdict::Skip("SARCFUSE_FULL_SCALE=1 not set (accelerator-scale run)".into()));
    }
    let mut lines = Vec::new();
    let mut ok = true;
    for d in present_datasets(&root) {
        let mut config = TrainConfig::for_dataset(d);
        config.assets = real_assets(&assets);
        let bundle = load_canonical(&root.join(d.as_str()), d).map_err(|e| e.to_string())?;
        let (emo, sent) = sarcfuse::fusion::load_extractors(&config).map_err(|e| e.to_string())?;
        let trained = train_fused(&bundle, &config, emo, sent, None).map_err(|e| e.to_string())?;
        let texts: Vec<&str> = bundle.test().iter().map(|e| e.text.as_str()).collect();
        let gold: Vec<Label> = bundle.test().iter().map(|e| e.label).collect();
        let f1 = score(&predict_labels(&trained.model, &texts).map_err(|e| e.to_string())?, &gold)
            .map_err(|e| e.to_string())?
            .f1_macro;
        let target = published_f1(d, "fused");
        ok &= (f1 - target).abs() <= 0.03;
        lines.push(format!(
            "{d}: f1 {f1:.3} vs {target:.2} (seed {}, max_length {}, epochs {}, lr {}, batch {})",
            config.seed, config.max_length, config.max_epochs, config.learning_rate, config.batch_size
        ));
    }
    check(ok, lines.join("; "))
}

fn median3(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn ordering_at_reduced_scale() -> Outcome {
    let (Some(root), Some(assets)) = (data_root(), assets_dir()) else {
        return Ok(Verdict::Skip("SARCFUSE_DATA_ROOT and SARCFUSE_ASSETS_DIR not both set".into()));
    };
    let d = DatasetName::SarcMovies;
    if !root.join(d.as_str()).is_dir() {
        return Ok(Verdict::Skip("sarc_movies not under SARCFUSE_DATA_ROOT".into()));
    }
    let full = load_canonical(&root.join(d.as_str()), d).map_err(|e| e.to_string())?;
    let (mut fused, mut nbow) = (Vec::new(), Vec::new());
    for seed in [1u64, 2, 3] {
        let bundle = full.subsample(800, 200, seed).map_err(|e| e.to_string())?;
        let mut config = TrainConfig::for_dataset(d);
        config.assets = real_assets(&assets);
        config.seed = seed;
        nbow.push(run_baseline(BaselineKind::Nbow, &bundle, &config).map_err(|e| e.to_string())?.metrics.f1_macro);
        let (emo, sent) = sarcfuse::fusion::load_extractors(&config).map_err(|e| e.to_string())?;
        let trained = train_fused(&bundle, &config, emo, sent, None).map_err(|e| e.to_string())?;
        let texts: Vec<&str> = bundle.test().iter().map(|e| e.text.as_str()).collect();
        let gold: Vec<Label> = bundle.test().iter().map(|e| e.label).collect();
        let preds = predict_labels(&trained.model, &texts).map_err(|e| e.to_string())?;
        fused.push(score(&preds, &gold).map_err(|e| e.to_string())?.f1_macro);
    }
    let (f, n) = (median3(fused.clone()), median3(nbow.clone()));
    check(f > n, format!("median macro f1 fused {f:.3} {fused:?} vs nbow {n:.3} {nbow:?}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        ("freeze invariant", freeze_invariant),
        ("simplex checks", simplex_checks),
        ("shape chain", shape_chain),
        ("gradient checks", gradient_checks),
        ("metrics oracle", metrics_oracle),
        ("overfit capacity", overfit_capacity),
        ("determinism", determinism),
        ("embedding fallback", embedding_fallback),
        ("masked-LM sanity", mlm_sanity),
        ("published counts", table1_counts),
        ("length statistics", table4_stats),
        ("averaged-vector baseline F1", nbow_full_scale),
        ("fused model F1 at full scale", fused_full_scale),
        ("fused beats averaged vectors at reduced scale", ordering_at_reduced_scale),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let verdict = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict::Fail(format!("error: {e}")),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::Fail(format!("panicked: {msg}"))
            }
        };
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{n:>2}] {name}: {detail}");
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
