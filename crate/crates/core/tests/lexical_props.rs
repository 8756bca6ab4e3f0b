use std::io::Write;

use proptest::prelude::*;
use sarcfuse::baselines::sentence_vector;
use sarcfuse::lexical::{encode_for_cnn, load_embeddings, PorterStemmer, Provenance, Vocabulary, PAD_INDEX};

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,7}"
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoded_length_is_always_max_words(text in "\\PC{0,80}", max_words in 1usize..40) {
        let vocab = Vocabulary::from_tokens(["the", "movie", "great"]);
        prop_assert_eq!(encode_for_cnn(&text, &vocab, max_words).len(), max_words);
    }

    #[test]
    fn table_rows_partition_and_are_seeded(
        vocab_words in prop::collection::btree_set(word(), 1..25),
        file_words in prop::collection::btree_set(word(), 0..25),
        seed in any::<u64>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        for (i, w) in file_words.iter().enumerate() {
            writeln!(f, "{w} {} {} 0.5 -0.5", i as f32 + 1.0, -(i as f32) - 1.0).unwrap();
        }
        drop(f);
        let vocab = Vocabulary::from_tokens(vocab_words.iter());
        let a = load_embeddings(&vocab, &path, 4, &PorterStemmer, seed).unwrap();
        let b = load_embeddings(&vocab, &path, 4, &PorterStemmer, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.rows(), vocab.len());
        for i in 0..a.rows() {
            let zero = a.row(i).iter().all(|&x| x == 0.0);
            if i == PAD_INDEX {
                prop_assert_eq!(a.provenance(i), Provenance::PadZero);
                prop_assert!(zero);
            } else {
                prop_assert!(matches!(
                    a.provenance(i),
                    Provenance::Pretrained | Provenance::StemmedFallback | Provenance::Random
                ));
                prop_assert!(!zero);
            }
        }
    }

    #[test]
    fn two_word_sentence_vector_is_mean(x in prop::collection::vec(-2.0f32..2.0, 3), y in prop::collection::vec(-2.0f32..2.0, 3)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        std::fs::write(&path, format!("alpha {} {} {}\nbeta {} {} {}\n", x[0], x[1], x[2], y[0], y[1], y[2])).unwrap();
        let vocab = Vocabulary::from_tokens(["alpha", "beta"]);
        let table = load_embeddings(&vocab, &path, 3, &PorterStemmer, 0).unwrap();
        let v = sentence_vector("alpha beta", &vocab, &table);
        for k in 0..3 {
            let want = (x[k] as f64 + y[k] as f64) / 2.0;
            prop_assert!((v[k] - want).abs() < 1e-6, "{} vs {}", v[k], want);
        }
    }
}

#[test]
fn unknown_words_are_skipped_in_sentence_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.txt");
    std::fs::write(&path, "alpha 1 2\n").unwrap();
    let vocab = Vocabulary::from_tokens(["alpha", "zzq"]);
    let table = load_embeddings(&vocab, &path, 2, &PorterStemmer, 0).unwrap();
    assert_eq!(sentence_vector("alpha zzq qqq", &vocab, &table), vec![1.0, 2.0]);
    assert_eq!(sentence_vector("qqq", &vocab, &table), vec![0.0, 0.0]);
}
