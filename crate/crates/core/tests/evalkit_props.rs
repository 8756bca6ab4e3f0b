mod common;

use proptest::prelude::*;
use sarcfuse::corpus::Label;
use sarcfuse::evalkit::score;

fn labels(n: usize) -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(any::<bool>().prop_map(|b| if b { Label::Sarcastic } else { Label::NonSarcastic }), n)
}

fn pair() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
    (1usize..300).prop_flat_map(|n| (labels(n), labels(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_counting_oracle((preds, gold) in pair()) {
        let got = score(&preds, &gold).unwrap();
        prop_assert!(common::max_metric_gap(&got, &common::brute_force(&preds, &gold)) <= 1e-12);
    }

    #[test]
    fn label_swap_symmetry((preds, gold) in pair()) {
        let a = score(&preds, &gold).unwrap();
        let flip = |xs: &[Label]| xs.iter().map(|l| l.flipped()).collect::<Vec<_>>();
        let b = score(&flip(&preds), &flip(&gold)).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        prop_assert!((a.f1_macro - b.f1_macro).abs() <= 1e-15);
        prop_assert!((a.precision_macro - b.precision_macro).abs() <= 1e-15);
        prop_assert!((a.recall_macro - b.recall_macro).abs() <= 1e-15);
        prop_assert_eq!(a.class(Label::Sarcastic), b.class(Label::NonSarcastic));
        prop_assert_eq!(a.class(Label::NonSarcastic), b.class(Label::Sarcastic));
    }

    #[test]
    fn averages_are_built_from_per_class((preds, gold) in pair()) {
        let m = score(&preds, &gold).unwrap();
        let (s, n) = (m.class(Label::Sarcastic), m.class(Label::NonSarcastic));
        let total = (s.support + n.support) as f64;
        prop_assert!((m.f1_macro - (s.f1 + n.f1) / 2.0).abs() <= 1e-15);
        prop_assert!((m.f1_weighted - (s.f1 * s.support as f64 + n.f1 * n.support as f64) / total).abs() <= 1e-12);
        prop_assert_eq!(score(&preds, &gold).unwrap(), m);
    }
}
