mod common;

use common::*;
use stackguard_core::models::CellKind;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn assert_all(name: &str, check: impl Fn(u64) -> stackguard_core::nn::GradCheckReport) {
    for seed in SEEDS {
        let r = check(seed);
        assert!(
            r.passed(TOLERANCE),
            "{name} seed {seed}: rel {:.3e} at {:?} (analytic {:.6e}, numeric {:.6e})",
            r.max_relative_error,
            r.worst,
            r.analytic,
            r.numeric
        );
    }
}

#[test]
fn dense_sigmoid_bce_micro_net() {
    assert_all("dense", check_dense);
}

#[test]
fn simple_rnn_classifier() {
    assert_all("rnn", |s| check_classifier(CellKind::Rnn, 2, false, s));
}

#[test]
fn lstm_classifier() {
    assert_all("lstm", |s| check_classifier(CellKind::Lstm, 2, false, s));
}

#[test]
fn bilstm_stack() {
    assert_all("bilstm", |s| check_classifier(CellKind::Lstm, 2, true, s));
}

#[test]
fn bidirectional_simple_rnn() {
    assert_all("birnn", |s| check_classifier(CellKind::Rnn, 1, true, s));
}

#[test]
fn autoencoder_reconstruction() {
    assert_all("ae-mse", check_reconstruction);
}

#[test]
fn autoencoder_head_fine_tuning() {
    assert_all("ae-head", check_autoencoder_head);
}

#[test]
fn meta_learner() {
    assert_all("meta", check_meta);
}
