#![allow(dead_code)]

use rand::Rng;
use stackguard_core::ensemble::{MetaObjective, StackInput};
use stackguard_core::lexer::EncodedSequence;
use stackguard_core::models::objectives::{AutoencoderHeadObjective, ClassifierObjective, ReconstructionObjective};
use stackguard_core::models::{CellKind, Embedding, LstmAutoencoder, SequenceClassifier};
use stackguard_core::nn::{grad_check, Dense, DenseBceObjective, GradCheckReport, Parameter, Tensor};
use stackguard_core::rng;
use stackguard_core::Architecture;

pub mod experiments;
pub mod oracle;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Sequences of length 4 over `rows` ids with assorted amounts of padding.
pub fn toy_batch(rows: usize, seed: u64) -> (Vec<EncodedSequence>, Vec<f64>) {
    let mut r = rng::seeded(seed);
    let lengths = [4usize, 2, 3, 1];
    let seqs = lengths
        .iter()
        .map(|&len| {
            let mut ids: Vec<u32> = (0..len).map(|_| r.random_range(1..rows as u32)).collect();
            ids.resize(4, 0);
            EncodedSequence { ids }
        })
        .collect();
    let labels = vec![1.0, 0.0, 1.0, 0.0];
    (seqs, labels)
}

fn table(rows: usize, dim: usize, r: &mut rng::Rng) -> Tensor {
    let mut t = Tensor::uniform(&[rows, dim], 0.8, r);
    t.row_mut(0).fill(0.0);
    t
}

/// Moves every bias off zero so their gradients are exercised at generic points.
fn jitter(params: Vec<&mut Parameter>, r: &mut rng::Rng) {
    for p in params {
        for v in p.value.data_mut() {
            *v += r.random_range(-0.8..0.8);
        }
    }
}

pub fn check_dense(seed: u64) -> GradCheckReport {
    let mut r = rng::seeded(seed);
    let mut obj = DenseBceObjective {
        hidden: Dense::new(3, 5, &mut r),
        output: Dense::new(5, 1, &mut r),
        x: Tensor::uniform(&[6, 3], 1.0, &mut r),
        y: Tensor::matrix(6, 1, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap(),
    };
    jitter(obj.output.parameters_mut(), &mut r);
    grad_check(&mut obj, STEP)
}

pub fn check_classifier(cell: CellKind, layers: usize, bidirectional: bool, seed: u64) -> GradCheckReport {
    let mut r = rng::seeded(seed);
    let rows = 7;
    let emb = Embedding::new(table(rows, 3, &mut r), true);
    let mut model = SequenceClassifier::new(emb, cell, 5, layers, bidirectional, 0.0, &mut r);
    jitter(model.stack.parameters_mut(), &mut r);
    let (seqs, labels) = toy_batch(rows, seed);
    let mut obj = ClassifierObjective { model, seqs, labels };
    grad_check(&mut obj, STEP)
}

pub fn check_architecture(arch: Architecture, seed: u64) -> GradCheckReport {
    match arch {
        Architecture::SimpleRnn => check_classifier(CellKind::Rnn, 1, false, seed),
        Architecture::Lstm => check_classifier(CellKind::Lstm, 2, false, seed),
        Architecture::Bilstm => check_classifier(CellKind::Lstm, 2, true, seed),
        Architecture::LstmAutoencoder => {
            let a = check_reconstruction(seed);
            let b = check_autoencoder_head(seed);
            if a.max_relative_error >= b.max_relative_error {
                a
            } else {
                b
            }
        }
        Architecture::Word2vecClf => check_dense(seed),
    }
}

fn toy_autoencoder(seed: u64) -> (LstmAutoencoder, Vec<EncodedSequence>, Vec<f64>) {
    let mut r = rng::seeded(seed);
    let rows = 7;
    let emb = Embedding::new(table(rows, 3, &mut r), true);
    let mut model = LstmAutoencoder::new(emb, 4, 5, &mut r);
    jitter(model.reconstruction_mut(), &mut r);
    let (mut seqs, labels) = toy_batch(rows, seed);
    seqs.truncate(3);
    (model, seqs, labels[..3].to_vec())
}

pub fn check_reconstruction(seed: u64) -> GradCheckReport {
    let (model, seqs, _) = toy_autoencoder(seed);
    grad_check(&mut ReconstructionObjective { model, seqs }, STEP)
}

pub fn check_autoencoder_head(seed: u64) -> GradCheckReport {
    let (model, seqs, labels) = toy_autoencoder(seed);
    grad_check(&mut AutoencoderHeadObjective { model, seqs, labels }, STEP)
}

pub fn check_meta(seed: u64) -> GradCheckReport {
    let mut r = rng::seeded(seed);
    let matrix: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..5).map(|_| r.random::<f64>()).collect())
        .collect();
    let labels: Vec<f64> = (0..20).map(|i| f64::from(i % 2 == 0)).collect();
    let input = StackInput::new(matrix, Architecture::ALL.to_vec()).unwrap();
    let mut obj = MetaObjective {
        weights: Parameter::new(Tensor::uniform(&[5], 1.0, &mut r)),
        bias: Parameter::new(Tensor::vector(vec![0.3])),
        input: &input,
        labels: &labels,
        l2: 0.05,
    };
    grad_check(&mut obj, STEP)
}
