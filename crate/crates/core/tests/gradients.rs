mod common;

use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sarcfuse::nn::{ClassifierHead, Conv1d, Encoder, Mode, ParamStore};
use sarcfuse::toy::toy_encoder_config;

#[test]
fn fusion_head_and_projections_match_finite_differences() {
    for seed in [1, 2] {
        let (worst, n) = common::fusion_gradient_check(seed);
        assert!(n > 50 && worst <= 1.0, "seed {seed}: worst ratio {worst} over {n}");
    }
}

#[test]
fn cnn_filters_match_finite_differences() {
    for seed in [1, 2] {
        let (worst, n) = common::cnn_gradient_check(seed);
        assert!(n > 10 && worst <= 1.0, "seed {seed}: worst ratio {worst} over {n}");
    }
}

#[test]
fn padded_conv_matches_finite_differences() {
    let store = ParamStore::new(3, DType::F64, Device::Cpu);
    let conv = Conv1d::load(3, 4, 3, 1, store.var_builder().pp("conv")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = common::random_tensor(&mut rng, 6, 5, DType::F64).reshape((2, 3, 5)).unwrap();
    let w = common::random_tensor(&mut rng, 8, 5, DType::F64).reshape((2, 4, 5)).unwrap();
    let loss = || (conv.forward(&x).unwrap() * &w).unwrap().sum_all().unwrap();
    let (worst, n) = common::finite_difference_check(&store, &["conv."], 20, 1e-4, 1e-9, &loss);
    assert!(n > 0 && worst <= 1.0, "worst ratio {worst}");
}

#[test]
fn encoder_and_classifier_match_finite_differences() {
    let mut cfg = toy_encoder_config(20, Some(2));
    cfg.hidden_size = 8;
    cfg.num_attention_heads = 2;
    cfg.num_hidden_layers = 1;
    cfg.intermediate_size = 16;
    let store = ParamStore::new(5, DType::F64, Device::Cpu);
    let vb = store.var_builder();
    let encoder = Encoder::load(&cfg, vb.pp("roberta")).unwrap();
    let head = ClassifierHead::load(&cfg, 2, vb).unwrap();
    let dev = Device::Cpu;
    let ids = Tensor::new(&[[0u32, 7, 9, 11, 2, 1], [0, 5, 6, 2, 1, 1]], &dev).unwrap();
    let mask = Tensor::new(&[[1u32, 1, 1, 1, 1, 0], [1, 1, 1, 1, 0, 0]], &dev).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w = common::random_tensor(&mut rng, 2, 2, DType::F64);
    let loss = || {
        let cls = encoder.cls(&ids, &mask, Mode::Eval).unwrap();
        let logp = candle_nn::ops::log_softmax(&head.forward(&cls, Mode::Eval).unwrap(), 1).unwrap();
        (logp * &w).unwrap().sum_all().unwrap()
    };
    let (worst, n) = common::finite_difference_check(
        &store,
        &["roberta.encoder.", "roberta.embeddings.LayerNorm", "classifier."],
        6,
        1e-4,
        1e-8,
        &loss,
    );
    assert!(n > 50 && worst <= 1.0, "worst ratio {worst} over {n}");
}

#[test]
fn attention_query_and_key_receive_gradient() {
    let mut cfg = toy_encoder_config(20, Some(2));
    cfg.hidden_size = 8;
    cfg.num_attention_heads = 2;
    cfg.num_hidden_layers = 1;
    cfg.intermediate_size = 16;
    let store = ParamStore::new(6, DType::F64, Device::Cpu);
    let vb = store.var_builder();
    let encoder = Encoder::load(&cfg, vb.pp("roberta")).unwrap();
    let head = ClassifierHead::load(&cfg, 2, vb).unwrap();
    // init std is too small for score gradients to clear the tolerance floor
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["query", "key"] {
        let var = store.var(&format!("roberta.encoder.layer.0.attention.self.{name}.weight")).unwrap();
        var.set(&common::random_tensor(&mut rng, 8, 8, DType::F64)).unwrap();
    }
    let dev = Device::Cpu;
    let ids = Tensor::new(&[[0u32, 7, 9, 11, 2, 1], [0, 5, 6, 2, 1, 1]], &dev).unwrap();
    let mask = Tensor::new(&[[1u32, 1, 1, 1, 1, 0], [1, 1, 1, 1, 0, 0]], &dev).unwrap();
    let w = common::random_tensor(&mut rng, 2, 2, DType::F64);
    let loss = || {
        let cls = encoder.cls(&ids, &mask, Mode::Eval).unwrap();
        let logp = candle_nn::ops::log_softmax(&head.forward(&cls, Mode::Eval).unwrap(), 1).unwrap();
        (logp * &w).unwrap().sum_all().unwrap()
    };
    let grads = loss().backward().unwrap();
    let qw = store.var("roberta.encoder.layer.0.attention.self.query.weight").unwrap();
    let norm = grads.get(qw.as_tensor()).unwrap().sqr().unwrap().sum_all().unwrap().to_scalar::<f64>().unwrap();
    assert!(norm > 1e-14, "query gradient norm {norm}");
    let (worst, n) = common::finite_difference_check(
        &store,
        &["roberta.encoder.layer.0.attention.self.query.", "roberta.encoder.layer.0.attention.self.key.weight"],
        12,
        1e-4,
        1e-10,
        &loss,
    );
    assert!(n >= 24 && worst <= 1.0, "worst ratio {worst} over {n}");
}
