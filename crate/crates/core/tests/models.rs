use rand::seq::SliceRandom as _;
use stackguard_core::corpus::{split_dataset, SplitRatios};
use stackguard_core::lexer::{EncodedSequence, TokenizerConfig, PAD_ID};
use stackguard_core::models::{
    build_model, fit, load_checkpoint, predict_proba, save_checkpoint, train_autoencoder, EmbeddingClassifier, Examples,
    ModelConfig, Network,
};
use stackguard_core::nn::{sigmoid_scalar, Tensor};
use stackguard_core::pipeline::{prepare_split, PreparedData};
use stackguard_core::rng;
use stackguard_core::synth::{generate_synthetic_corpus, SynthProfile};
use stackguard_core::{Architecture, EmbeddingMode};

const SEQ: usize = 30;

fn prepared() -> PreparedData {
    let data = generate_synthetic_corpus(240, SynthProfile::RiskyCalls, 0.05, 3).unwrap();
    let split = split_dataset(&data, SplitRatios::new(0.7, 0.15, 0.15).unwrap(), 3).unwrap();
    let tokenizer = TokenizerConfig {
        max_sequence_length: SEQ,
        ..TokenizerConfig::default()
    };
    prepare_split(&split, &tokenizer, 1000).unwrap()
}

fn small(arch: Architecture, epochs: usize) -> ModelConfig {
    ModelConfig {
        hidden_size: 8,
        num_layers: 1,
        embedding_dim: 8,
        epochs,
        head_epochs: epochs,
        max_sequence_length: SEQ,
        seed: 17,
        embedding: EmbeddingMode::TrainableMinimal,
        ..ModelConfig::defaults(arch)
    }
}

fn values(net: &Network) -> Vec<(String, Tensor)> {
    net.parameters().into_iter().map(|(n, p)| (n, p.value.clone())).collect()
}

fn padding_only() -> EncodedSequence {
    EncodedSequence { ids: vec![PAD_ID; SEQ] }
}

#[test]
fn zero_epochs_keep_the_initial_weights() {
    let p = prepared();
    for arch in [Architecture::SimpleRnn, Architecture::Lstm, Architecture::Bilstm, Architecture::LstmAutoencoder] {
        let cfg = small(arch, 0);
        let init = build_model(&cfg, p.vocab.size(), None).unwrap();
        let fitted = fit(&cfg, p.vocab.size(), &p.train, &p.validation, None).unwrap();
        assert!(fitted.history.is_empty(), "{arch}");
        assert_eq!(values(&fitted.network), values(&init.network), "{arch}");
    }
}

#[test]
fn same_seed_gives_identical_parameters() {
    let p = prepared();
    for arch in Architecture::ALL {
        let cfg = small(arch, 2);
        let a = fit(&cfg, p.vocab.size(), &p.train, &p.validation, None).unwrap();
        let b = fit(&cfg, p.vocab.size(), &p.train, &p.validation, None).unwrap();
        assert_eq!(a.network, b.network, "{arch}");
        assert_eq!(a.history, b.history, "{arch}");
        let other = fit(&ModelConfig { seed: 18, ..cfg }, p.vocab.size(), &p.train, &p.validation, None).unwrap();
        assert_ne!(a.network, other.network, "{arch}");
    }
}

#[test]
fn outputs_are_probabilities_and_row_deterministic() {
    let p = prepared();
    let mut inputs = p.test.seqs.clone();
    inputs.push(p.test.seqs[0].clone());
    inputs.push(padding_only());
    inputs.push(padding_only());
    for arch in Architecture::ALL {
        let model = fit(&small(arch, 2), p.vocab.size(), &p.train, &p.validation, None).unwrap();
        let probs = predict_proba(&model, &inputs).unwrap().probs;
        assert_eq!(probs.len(), inputs.len());
        assert!(probs.iter().all(|x| (0.0..=1.0).contains(x)), "{arch}");
        let n = inputs.len();
        assert_eq!(probs[0], probs[n - 3], "{arch}: duplicate rows differ");
        assert_eq!(probs[n - 2], probs[n - 1], "{arch}: padding rows differ");
    }
}

#[test]
fn predictions_do_not_depend_on_batch_composition() {
    let p = prepared();
    let model = fit(&small(Architecture::Lstm, 1), p.vocab.size(), &p.train, &p.validation, None).unwrap();
    let all = predict_proba(&model, &p.test.seqs).unwrap().probs;
    for (i, s) in p.test.seqs.iter().enumerate() {
        let one = predict_proba(&model, std::slice::from_ref(s)).unwrap().probs[0];
        assert!((one - all[i]).abs() < 1e-12);
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let p = prepared();
    let dir = tempfile::tempdir().unwrap();
    for arch in Architecture::ALL {
        let model = fit(&small(arch, 1), p.vocab.size(), &p.train, &p.validation, None).unwrap();
        let path = dir.path().join(arch.name());
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(values(&back.network), values(&model.network), "{arch}");
        assert_eq!(
            predict_proba(&back, &p.test.seqs).unwrap(),
            predict_proba(&model, &p.test.seqs).unwrap()
        );
    }
}

#[test]
fn autoencoder_reconstructs_training_order_better_than_shuffles() {
    let p = prepared();
    let cfg = ModelConfig {
        hidden_size: 16,
        embedding_dim: 16,
        learning_rate: 0.01,
        ..small(Architecture::LstmAutoencoder, 8)
    };
    let untrained = build_model(&cfg, p.vocab.size(), None).unwrap();
    let same = train_autoencoder(untrained.clone(), &p.train.seqs, &[]).unwrap();
    let idle_cfg = ModelConfig { epochs: 0, ..cfg.clone() };
    let none = train_autoencoder(build_model(&idle_cfg, p.vocab.size(), None).unwrap(), &p.train.seqs, &[]).unwrap();
    let (Network::Autoencoder(trained), Network::Autoencoder(init), Network::Autoencoder(still)) =
        (&same.network, &untrained.network, &none.network)
    else {
        panic!("not an autoencoder");
    };
    assert_eq!(init, still);

    let mut r = rng::seeded(5);
    let shuffled: Vec<EncodedSequence> = p
        .train
        .seqs
        .iter()
        .map(|s| {
            let mut ids = s.ids.clone();
            let n = s.valid_len();
            ids[..n].shuffle(&mut r);
            EncodedSequence { ids }
        })
        .collect();
    fn refs(v: &[EncodedSequence]) -> Vec<&EncodedSequence> {
        v.iter().collect()
    }
    let on_train = trained.reconstruction_loss(&refs(&p.train.seqs)).unwrap();
    let on_shuffled = trained.reconstruction_loss(&refs(&shuffled)).unwrap();
    let before = init.reconstruction_loss(&refs(&p.train.seqs)).unwrap();
    assert!(on_train < before, "{on_train} vs untrained {before}");
    assert!(on_train < on_shuffled, "{on_train} vs shuffled {on_shuffled}");
}

#[test]
fn pooled_classifier_is_order_free_and_padding_gives_the_bias() {
    let mut r = rng::seeded(2);
    let mut table = Tensor::uniform(&[10, 6], 1.0, &mut r);
    table.row_mut(0).fill(0.0);
    let clf = EmbeddingClassifier::new(table, &mut r);
    let a = EncodedSequence { ids: vec![3, 7, 2, 9, 0, 0] };
    let b = EncodedSequence { ids: vec![9, 2, 3, 7, 0, 0] };
    let pad = EncodedSequence { ids: vec![0; 6] };
    let p = clf.predict(&[&a, &b, &pad]).unwrap();
    assert!((p[0] - p[1]).abs() < 1e-12);
    assert_eq!(p[2], sigmoid_scalar(clf.head.bias.value.data()[0]));
}

#[test]
fn recurrent_models_need_a_matching_embedding() {
    let cfg = small(Architecture::Lstm, 1);
    let stacked = ModelConfig {
        embedding: EmbeddingMode::StackedGloveFasttext,
        ..cfg.clone()
    };
    assert!(build_model(&stacked, 20, None).is_err());
    assert!(build_model(&small(Architecture::Word2vecClf, 1), 20, None).is_err());
    let empty = Examples::new(Vec::new(), Vec::new()).unwrap();
    assert!(fit(&cfg, 20, &empty, &empty, None).is_err());
}
