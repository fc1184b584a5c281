use std::time::Duration;

use proptest::prelude::*;
use stackguard_core::corpus::{read_csv, split_dataset, write_csv_to, Label, LabeledFunction, SplitRatios};
use stackguard_core::ensemble::{final_prediction, weighted_probability};
use stackguard_core::lexer::{build_vocabulary, encode, escape_token, tokenize, unescape_token, TokenizerConfig, PAD_ID};
use stackguard_core::metrics::{confusion, MetricName, MetricsReport};

fn function() -> impl Strategy<Value = LabeledFunction> {
    ("[a-z(){};*, \n\t\"]{0,40}[a-z]", any::<bool>()).prop_map(|(source, vulnerable)| {
        let label = if vulnerable { Label::Vulnerable } else { Label::Safe };
        LabeledFunction::new(source, label).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn csv_round_trip(data in prop::collection::vec(function(), 0..20)) {
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &data).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn split_is_a_permutation(data in prop::collection::vec(function(), 3..60), seed in any::<u64>()) {
        let s = split_dataset(&data, SplitRatios::new(0.6, 0.2, 0.2).unwrap(), seed).unwrap();
        let mut joined: Vec<_> = s.train.iter().chain(&s.validation).chain(&s.test).cloned().collect();
        let mut original = data.clone();
        joined.sort();
        original.sort();
        prop_assert_eq!(joined, original);
        let again = split_dataset(&data, SplitRatios::new(0.6, 0.2, 0.2).unwrap(), seed).unwrap();
        prop_assert_eq!(again.test, s.test);
    }

    #[test]
    fn tokens_never_contain_spaces(source in "[ -~\n\t]{0,80}") {
        let tokens = tokenize(&source, &TokenizerConfig::default());
        for t in tokens.iter() {
            prop_assert!(!t.is_empty());
            prop_assert!(!t.contains(' '));
        }
    }

    #[test]
    fn escaped_tokens_round_trip(token in "[ -~\n\r\t\\\\]{1,12}") {
        let e = escape_token(&token);
        prop_assert!(!e.contains('\n') && !e.contains('\t') && !e.contains('\r'));
        prop_assert_eq!(unescape_token(&e).unwrap(), token);
    }

    #[test]
    fn encoding_has_fixed_length_and_a_padding_suffix(
        source in "[a-f ]{0,60}",
        max_len in 1usize..20,
    ) {
        let tokens = tokenize(&source, &TokenizerConfig::default());
        let base = tokenize("a b c", &TokenizerConfig::default());
        let vocab = build_vocabulary(&[base, tokens.clone()], 3).unwrap();
        let e = encode(&tokens, &vocab, max_len);
        prop_assert_eq!(e.len(), max_len);
        let valid = e.valid_len();
        prop_assert_eq!(valid, tokens.len().min(max_len));
        prop_assert!(e.ids[valid..].iter().all(|&id| id == PAD_ID));
        prop_assert!(e.ids[..valid].iter().all(|&id| id != PAD_ID && (id as usize) < vocab.rows()));
    }

    #[test]
    fn metrics_stay_in_the_unit_interval(
        rows in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 1..100),
    ) {
        let (probs, labels): (Vec<f64>, Vec<u8>) = rows.into_iter().unzip();
        let c = confusion(&probs, &labels, 0.5).unwrap();
        prop_assert_eq!(c.total(), labels.len());
        let m = MetricsReport::evaluate(&probs, &labels, Duration::ZERO).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
        prop_assert_eq!(m.undefined.contains(&MetricName::Precision), c.tp + c.fp == 0);
    }

    #[test]
    fn weighted_probability_is_bounded_by_the_weights(
        rows in prop::collection::vec((0.0f64..=1.0, -3.0f64..3.0), 1..8),
        bias in -5.0f64..5.0,
    ) {
        let (p, w): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let pw = weighted_probability(&p, &w).unwrap();
        let lo: f64 = w.iter().map(|x| x.min(0.0)).sum();
        let hi: f64 = w.iter().map(|x| x.max(0.0)).sum();
        prop_assert!(pw >= lo - 1e-12 && pw <= hi + 1e-12);
        let out = final_prediction(pw, bias);
        prop_assert!((0.0..=1.0).contains(&out));
        prop_assert_eq!(out >= 0.5, pw + bias >= 0.0);
    }
}
