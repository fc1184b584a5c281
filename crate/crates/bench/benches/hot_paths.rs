use criterion::{black_box, criterion_group, criterion_main, Criterion};
use stackguard_core::embeddings::{build_cooccurrence, train_glove, GloveParams};
use stackguard_core::lexer::{build_vocabulary, encode, tokenize, EncodedSequence, TokenSequence, TokenizerConfig};
use stackguard_core::metrics::confusion;
use stackguard_core::models::{CellKind, Embedding, SequenceClassifier};
use stackguard_core::nn::Tensor;
use stackguard_core::rng;
use stackguard_core::synth::{generate_synthetic_corpus, SynthProfile};

fn corpus() -> (Vec<EncodedSequence>, usize) {
    let data = generate_synthetic_corpus(512, SynthProfile::RiskyCalls, 0.05, 7).unwrap();
    let cfg = TokenizerConfig {
        max_sequence_length: 50,
        ..TokenizerConfig::default()
    };
    let tokens: Vec<TokenSequence> = data.iter().map(|f| tokenize(&f.source, &cfg)).collect();
    let vocab = build_vocabulary(&tokens, 10_000).unwrap();
    let seqs = tokens.iter().map(|t| encode(t, &vocab, 50)).collect();
    (seqs, vocab.rows())
}

fn bench_tokenize(c: &mut Criterion) {
    let data = generate_synthetic_corpus(512, SynthProfile::RiskyCalls, 0.05, 7).unwrap();
    let cfg = TokenizerConfig::default();
    c.bench_function("tokenize 512 functions", |b| {
        b.iter(|| data.iter().map(|f| tokenize(black_box(&f.source), &cfg).len()).sum::<usize>())
    });
}

fn bench_recurrent(c: &mut Criterion) {
    let (seqs, rows) = corpus();
    let batch: Vec<&EncodedSequence> = seqs.iter().take(32).collect();
    let labels: Vec<f64> = (0..32).map(|i| (i % 2) as f64).collect();
    for (name, cell, bidir) in [
        ("simple rnn", CellKind::Rnn, false),
        ("lstm", CellKind::Lstm, false),
        ("bilstm", CellKind::Lstm, true),
    ] {
        let mut r = rng::seeded(1);
        let table = Tensor::uniform(&[rows, 32], 0.05, &mut r);
        let mut model = SequenceClassifier::new(Embedding::new(table, true), cell, 32, 1, bidir, 0.0, &mut r);
        c.bench_function(&format!("{name} loss+grad batch 32x50"), |b| {
            b.iter(|| model.loss_and_grad(black_box(&batch), &labels, None).unwrap())
        });
    }
}

fn bench_glove(c: &mut Criterion) {
    let (seqs, rows) = corpus();
    let cooc = build_cooccurrence(&seqs, 5).unwrap();
    let params = GloveParams {
        epochs: 1,
        ..GloveParams::default()
    };
    c.bench_function("glove epoch", |b| b.iter(|| train_glove(black_box(&cooc), rows, &params).unwrap()));
}

fn bench_metrics(c: &mut Criterion) {
    let mut r = rng::seeded(3);
    let probs: Vec<f64> = Tensor::uniform(&[4096], 0.5, &mut r).data().iter().map(|v| v + 0.5).collect();
    let labels: Vec<u8> = (0..4096).map(|i| (i % 3 == 0) as u8).collect();
    c.bench_function("confusion 4096", |b| b.iter(|| confusion(black_box(&probs), &labels, 0.5).unwrap()));
}

criterion_group!(benches, bench_tokenize, bench_recurrent, bench_glove, bench_metrics);
criterion_main!(benches);
