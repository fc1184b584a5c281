use rand::Rng as _;
use stackguard_core::corpus::{split_dataset, SplitRatios};
use stackguard_core::ensemble::{
    collect_level0, final_prediction, stack_trained, train_meta, weighted_probability, MetaParams, StackInput,
};
use stackguard_core::lexer::TokenizerConfig;
use stackguard_core::models::{fit, predict_proba, ModelConfig};
use stackguard_core::pipeline::prepare_split;
use stackguard_core::rng;
use stackguard_core::synth::{generate_synthetic_corpus, SynthProfile};
use stackguard_core::Architecture;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn order(m: usize) -> Vec<Architecture> {
    Architecture::ALL[..m].to_vec()
}

#[test]
fn weighted_sum_and_final_prediction_by_hand() {
    let p = [0.9, 0.2, 0.6, 0.4, 0.7];
    let w = [0.5, -1.0, 2.0, 0.0, 0.25];
    // 0.45 - 0.2 + 1.2 + 0 + 0.175
    let pw = weighted_probability(&p, &w).unwrap();
    assert!((pw - 1.625).abs() < 1e-12);
    assert!((final_prediction(pw, -0.625) - logistic(1.0)).abs() < 1e-15);
    assert_eq!(final_prediction(0.0, 0.0), 0.5);
    assert!(weighted_probability(&p, &w[..4]).is_err());
}

/// Level-0 columns: one exactly equals the label, the others are noise.
fn informative_input(n: usize, good: usize) -> (StackInput, Vec<u8>) {
    let mut r = rng::seeded(11);
    let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let matrix = labels
        .iter()
        .map(|&y| {
            (0..5)
                .map(|m| if m == good { f64::from(y) } else { r.random::<f64>() })
                .collect()
        })
        .collect();
    (StackInput::new(matrix, order(5)).unwrap(), labels)
}

#[test]
fn perfect_column_gets_the_largest_weight() {
    let (input, labels) = informative_input(200, 3);
    let meta = train_meta(&input, &labels, &MetaParams::default()).unwrap();
    let best = (0..5).max_by(|&a, &b| meta.weights[a].abs().total_cmp(&meta.weights[b].abs())).unwrap();
    assert_eq!(best, 3, "{:?}", meta.weights);
    assert!(meta.weights[3] > 0.0);
    let preds = meta.predict(&input).unwrap().probs;
    let hits = preds.iter().zip(&labels).filter(|(p, &y)| u8::from(**p >= 0.5) == y).count();
    assert_eq!(hits, labels.len());
}

#[test]
fn heavy_penalty_leaves_only_the_prior() {
    let mut r = rng::seeded(3);
    let labels: Vec<u8> = (0..300).map(|i| u8::from(i % 4 == 0)).collect();
    let matrix = labels
        .iter()
        .map(|&y| (0..5).map(|_| 0.5 * f64::from(y) + 0.5 * r.random::<f64>()).collect())
        .collect();
    let input = StackInput::new(matrix, order(5)).unwrap();
    let params = MetaParams {
        l2: 1e6,
        learning_rate: 0.5,
        epochs: 3000,
    };
    let meta = train_meta(&input, &labels, &params).unwrap();
    assert!(meta.weights.iter().all(|w| w.abs() < 1e-4), "{:?}", meta.weights);
    let prior = 0.25f64;
    assert!((meta.bias - (prior / (1.0 - prior)).ln()).abs() < 1e-3, "bias {}", meta.bias);
}

#[test]
fn single_class_labels_are_rejected() {
    let (input, _) = informative_input(20, 0);
    assert!(train_meta(&input, &[1; 20], &MetaParams::default()).is_err());
    assert!(train_meta(&input, &[0; 20], &MetaParams::default()).is_err());
    assert!(train_meta(&input, &[0; 19], &MetaParams::default()).is_err());
}

#[test]
fn one_hot_inputs_rank_by_reliability() {
    // model m agrees with the label on a fraction that falls with m
    let mut r = rng::seeded(21);
    let reliability = [0.95, 0.85, 0.75, 0.65, 0.55];
    let labels: Vec<u8> = (0..2000).map(|i| (i % 2) as u8).collect();
    let matrix = labels
        .iter()
        .map(|&y| {
            reliability
                .iter()
                .map(|&q| {
                    let agree = r.random::<f64>() < q;
                    f64::from(if agree { y } else { 1 - y })
                })
                .collect()
        })
        .collect();
    let input = StackInput::new(matrix, order(5)).unwrap();
    let meta = train_meta(&input, &labels, &MetaParams::default()).unwrap();
    for w in meta.weights.windows(2) {
        assert!(w[0] > w[1], "{:?}", meta.weights);
    }
}

#[test]
fn level0_columns_are_base_model_probabilities() {
    let data = generate_synthetic_corpus(200, SynthProfile::RiskyCalls, 0.05, 9).unwrap();
    let split = split_dataset(&data, SplitRatios::new(0.7, 0.15, 0.15).unwrap(), 9).unwrap();
    let tokenizer = TokenizerConfig {
        max_sequence_length: 30,
        ..TokenizerConfig::default()
    };
    let p = prepare_split(&split, &tokenizer, 1000).unwrap();
    let models: Vec<_> = Architecture::ALL
        .iter()
        .map(|&a| {
            let cfg = ModelConfig {
                hidden_size: 8,
                num_layers: 1,
                embedding_dim: 8,
                epochs: 1,
                head_epochs: 2,
                max_sequence_length: 30,
                seed: 4,
                ..ModelConfig::defaults(a)
            };
            fit(&cfg, p.vocab.size(), &p.train, &p.validation, None).unwrap()
        })
        .collect();
    let level0 = collect_level0(&models, &p.test.seqs).unwrap();
    assert_eq!(level0.rows(), p.test.len());
    assert_eq!(level0.model_order, Architecture::ALL.to_vec());
    for (m, model) in models.iter().enumerate() {
        assert_eq!(level0.column(m), predict_proba(model, &p.test.seqs).unwrap().probs);
    }
    assert_eq!(collect_level0(&models, &p.test.seqs).unwrap(), level0);

    let (ensemble, test_input, preds) =
        stack_trained(models, &p.validation.seqs, &p.validation.labels, &p.test.seqs, &MetaParams::default()).unwrap();
    assert_eq!(test_input, level0);
    assert_eq!(ensemble.predict(&p.test.seqs).unwrap(), preds);
    for (row, got) in level0.matrix.iter().zip(&preds.probs) {
        let z: f64 = row.iter().zip(&ensemble.meta.weights).map(|(a, b)| a * b).sum::<f64>() + ensemble.meta.bias;
        assert!((got - logistic(z)).abs() < 1e-12);
    }
}
