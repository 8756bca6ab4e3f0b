#![allow(dead_code)]

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcfuse::corpus::{DatasetBundle, DatasetName};
use sarcfuse::nn::ParamStore;
use sarcfuse::toy::{self, ToyAssets};

pub fn toy_setup(dir: &Path, seed: u64, n_train: usize, n_test: usize) -> (ToyAssets, DatasetBundle) {
    let assets = toy::write_toy_assets(&dir.join("assets"), seed).unwrap();
    let bundle = toy::toy_corpus(DatasetName::SarcMovies, n_train, n_test, seed).unwrap();
    (assets, bundle)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, dtype: DType) -> Tensor {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(data, (rows, cols), &Device::Cpu).unwrap().to_dtype(dtype).unwrap()
}

/// Random texts over the toy vocabulary.
pub fn random_texts(n: usize, seed: u64) -> Vec<String> {
    let words = toy::toy_words();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..12);
            (0..len).map(|_| words[rng.gen_range(0..words.len())].as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

/// Largest violation of `|analytic - numeric| <= rtol * max(|analytic|, |numeric|) + atol`
/// over up to `per_param` entries of each parameter whose name starts with
/// one of `prefixes`, as a ratio (<= 1 passes). `loss` must be scalar f64.
pub fn finite_difference_check(
    store: &ParamStore,
    prefixes: &[&str],
    per_param: usize,
    rtol: f64,
    atol: f64,
    loss: &dyn Fn() -> Tensor,
) -> (f64, usize) {
    let grads = loss().backward().unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for name in store.names() {
        if !prefixes.iter().any(|p| name.starts_with(p)) {
            continue;
        }
        let var = store.var(&name).unwrap();
        let base: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        // an absent gradient is an identically zero one
        let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all().unwrap().to_vec1().unwrap(),
            None => vec![0.0; base.len()],
        };
        let shape = var.as_tensor().shape().clone();
        let stride = (base.len() / per_param).max(1);
        for i in (0..base.len()).step_by(stride).take(per_param) {
            let eval_at = |delta: f64| {
                let mut v = base.clone();
                v[i] += delta;
                var.set(&Tensor::from_vec(v, shape.clone(), &Device::Cpu).unwrap()).unwrap();
                loss().to_scalar::<f64>().unwrap()
            };
            let numeric = (eval_at(h) - eval_at(-h)) / (2.0 * h);
            var.set(&Tensor::from_vec(base.clone(), shape.clone(), &Device::Cpu).unwrap()).unwrap();
            let a = analytic[i];
            let bound = rtol * a.abs().max(numeric.abs()) + atol;
            if std::env::var_os("GRAD_DEBUG").is_some() {
                eprintln!("{name}[{i}] analytic {a} numeric {numeric}");
            }
            worst = worst.max((a - numeric).abs() / bound);
            checked += 1;
        }
    }
    (worst, checked)
}

/// Gradient check of the fusion projections and head on a toy
/// configuration (projection width 3, branch widths 4) in f64.
pub fn fusion_gradient_check(seed: u64) -> (f64, usize) {
    use sarcfuse::fusion::{BranchDims, BranchInputs, FusionConfig, FusionHead};
    use sarcfuse::nn::Mode;

    let store = ParamStore::new(seed, DType::F64, Device::Cpu);
    let dims = BranchDims {
        sarc: 4,
        emotion: 4,
        sentiment: 4,
        cnn: 4,
    };
    let cfg = FusionConfig {
        projection_dim: 3,
        head_hidden_dim: 5,
        ..FusionConfig::default()
    };
    let head = FusionHead::load(dims, &cfg, 0.5, store.var_builder().pp("fusion")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let b = 3;
    let inputs = BranchInputs {
        v_cls: random_tensor(&mut rng, b, 4, DType::F64),
        u_cls: random_tensor(&mut rng, b, 4, DType::F64),
        el: random_tensor(&mut rng, b, 28, DType::F64).affine(0.5, 0.5).unwrap(),
        s_cls: random_tensor(&mut rng, b, 4, DType::F64),
        sl: random_tensor(&mut rng, b, 2, DType::F64).affine(0.5, 0.5).unwrap(),
        c: random_tensor(&mut rng, b, 4, DType::F64),
    };
    let weights = random_tensor(&mut rng, b, 2, DType::F64);
    let loss = || {
        let (_, logits) = head.forward(&inputs, Mode::Eval).unwrap();
        let logp = candle_nn::ops::log_softmax(&logits, 1).unwrap();
        (logp * &weights).unwrap().sum_all().unwrap()
    };
    finite_difference_check(&store, &["fusion."], 12, 1e-4, 1e-9, &loss)
}

/// Gradient check of the CNN filters (and embedding rows) in f64.
pub fn cnn_gradient_check(seed: u64) -> (f64, usize) {
    use sarcfuse::cnn_branch::{CnnBranch, CnnConfig};
    use sarcfuse::lexical::{EmbeddingTable, Provenance};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, dim) = (7, 5);
    let data: Vec<f32> = (0..rows * dim).map(|i| if i < dim { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let mut prov = vec![Provenance::Random; rows];
    prov[0] = Provenance::PadZero;
    let table = EmbeddingTable::from_rows(dim, data, prov).unwrap();
    let cfg = CnnConfig {
        filter_sizes: vec![2, 3],
        filters_per_size: 3,
        embedding_dim: dim,
        max_words: 6,
        dropout_rate: 0.0,
    };
    let store = ParamStore::new(seed, DType::F64, Device::Cpu);
    let cnn = CnnBranch::with_embeddings(&table, &cfg, &store, "cnn").unwrap();
    let idx: Vec<Vec<u32>> = (0..3).map(|_| (0..6).map(|_| rng.gen_range(1..rows as u32)).collect()).collect();
    let weights = random_tensor(&mut rng, 3, cnn.output_dim(), DType::F64);
    let loss = || (cnn.cnn_forward(&idx).unwrap() * &weights).unwrap().sum_all().unwrap();
    finite_difference_check(&store, &["cnn.convs"], 10, 1e-4, 1e-9, &loss)
}

/// Metrics recomputed by counting, independent of the library.
pub struct BruteForce {
    pub accuracy: f64,
    /// Per class in `Label::ALL` order: (precision, recall, f1, support).
    pub per_class: Vec<(f64, f64, f64, usize)>,
    pub macro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub weighted_f1: f64,
}

pub fn brute_force(preds: &[sarcfuse::corpus::Label], gold: &[sarcfuse::corpus::Label]) -> BruteForce {
    use sarcfuse::corpus::Label;
    let n = gold.len();
    let pairs: Vec<(Label, Label)> = preds.iter().copied().zip(gold.iter().copied()).collect();
    let correct = pairs.iter().filter(|(p, g)| p == g).count();
    let per_class: Vec<(f64, f64, f64, usize)> = Label::ALL
        .iter()
        .map(|&c| {
            let tp = pairs.iter().filter(|&&(p, g)| p == c && g == c).count();
            let fp = pairs.iter().filter(|&&(p, g)| p == c && g != c).count();
            let fn_ = pairs.iter().filter(|&&(p, g)| p != c && g == c).count();
            let safe = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let p = safe(tp, tp + fp);
            let r = safe(tp, tp + fn_);
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            (p, r, f, tp + fn_)
        })
        .collect();
    let mean = |k: fn(&(f64, f64, f64, usize)) -> f64| per_class.iter().map(k).sum::<f64>() / 2.0;
    BruteForce {
        accuracy: correct as f64 / n as f64,
        macro_precision: mean(|c| c.0),
        macro_recall: mean(|c| c.1),
        macro_f1: mean(|c| c.2),
        weighted_f1: per_class.iter().map(|c| c.2 * c.3 as f64).sum::<f64>() / n as f64,
        per_class,
    }
}

/// Largest absolute gap between the library report and the oracle; a
/// support mismatch counts as infinite.
pub fn max_metric_gap(got: &sarcfuse::evalkit::MetricsReport, want: &BruteForce) -> f64 {
    use sarcfuse::corpus::Label;
    let mut gaps = vec![
        (got.accuracy - want.accuracy).abs(),
        (got.f1_macro - want.macro_f1).abs(),
        (got.precision_macro - want.macro_precision).abs(),
        (got.recall_macro - want.macro_recall).abs(),
        (got.f1_weighted - want.weighted_f1).abs(),
    ];
    for (label, (p, r, f, s)) in Label::ALL.iter().zip(&want.per_class) {
        let c = got.class(*label);
        if c.support != *s {
            return f64::INFINITY;
        }
        gaps.extend([(c.precision - p).abs(), (c.recall - r).abs(), (c.f1 - f).abs()]);
    }
    gaps.into_iter().fold(0.0, f64::max)
}
