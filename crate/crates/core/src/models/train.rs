use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use super::{build_model, EpochRecord, ModelConfig, Network, Phase, PredictionVector, TrainedModel};
use crate::embeddings::{stack_embeddings, train_word2vec_sgns, EmbeddingMatrix, SgnsParams};
use crate::error::{Error, Result};
use crate::lexer::EncodedSequence;
use crate::models::Architecture;
use crate::nn::{Adam, Parameter, Tensor};
use crate::rng::{self, Rng};

/// Encoded functions with their labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Examples {
    pub seqs: Vec<EncodedSequence>,
    pub labels: Vec<u8>,
}

impl Examples {
    pub fn new(seqs: Vec<EncodedSequence>, labels: Vec<u8>) -> Result<Self> {
        if seqs.len() != labels.len() {
            return Err(Error::shape(format!("{} sequences but {} labels", seqs.len(), labels.len())));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::value(format!("label {l} is not 0 or 1")));
        }
        Ok(Examples { seqs, labels })
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    fn targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| f64::from(self.labels[i])).collect()
    }
}

fn refs<'a>(seqs: &'a [EncodedSequence], idx: &[usize]) -> Vec<&'a EncodedSequence> {
    idx.iter().map(|&i| &seqs[i]).collect()
}

fn shuffled_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn ordered_batches(n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    (0..n).collect::<Vec<_>>().chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Training { reason, .. } => Error::Training { epoch, reason },
        other => other,
    }
}

fn check_loss(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Training {
            epoch,
            reason: format!("loss became {loss}"),
        })
    }
}

fn check_lengths(seqs: &[EncodedSequence], expected: usize) -> Result<()> {
    match seqs.iter().position(|s| s.len() != expected) {
        Some(i) => Err(Error::shape(format!(
            "sequence {i} has length {}, model expects {expected}",
            seqs[i].len()
        ))),
        None => Ok(()),
    }
}

fn zero_grads(params: &mut [&mut Parameter]) {
    params.iter_mut().for_each(|p| p.zero_grad());
}

/// Batch-size weighted mean of `loss` over `n` items.
fn mean_over(n: usize, batch_size: usize, mut loss: impl FnMut(&[usize]) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for idx in ordered_batches(n, batch_size) {
        total += loss(&idx)? * idx.len() as f64;
    }
    Ok(total / n as f64)
}

fn finish(model: &mut TrainedModel, started: Instant) {
    model.wall_time += started.elapsed().max(Duration::from_nanos(1));
}

/// Minibatch BCE training of a recurrent classifier with Adam, recording
/// train and validation loss per epoch. No early stopping.
pub fn train_classifier(mut model: TrainedModel, train: &Examples, val: &Examples) -> Result<TrainedModel> {
    let started = Instant::now();
    let cfg = model.config.clone();
    if train.is_empty() {
        return Err(Error::value("training set is empty"));
    }
    check_lengths(&train.seqs, cfg.max_sequence_length)?;
    check_lengths(&val.seqs, cfg.max_sequence_length)?;
    let Network::Sequence(net) = &mut model.network else {
        return Err(Error::State(format!("{} is not a recurrent classifier", cfg.architecture)));
    };
    let mut adam = Adam::new(cfg.learning_rate, &net.trainable_mut());
    let mut shuffle = rng::seeded(rng::derive_seed(cfg.seed, "shuffle"));
    let mut dropout = rng::seeded(rng::derive_seed(cfg.seed, "dropout"));
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for idx in shuffled_batches(train.len(), cfg.batch_size, &mut shuffle) {
            zero_grads(&mut net.trainable_mut());
            let loss = net.loss_and_grad(&refs(&train.seqs, &idx), &train.targets(&idx), Some(&mut dropout))?;
            check_loss(loss, epoch)?;
            total += loss * idx.len() as f64;
            adam.step(&mut net.trainable_mut()).map_err(|e| at_epoch(e, epoch))?;
        }
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(mean_over(val.len(), cfg.batch_size, |idx| {
                net.loss(&refs(&val.seqs, idx), &val.targets(idx))
            })?)
        };
        model.history.push(EpochRecord {
            phase: Phase::Classification,
            train_loss: total / train.len() as f64,
            val_loss,
        });
    }
    model.trained = true;
    finish(&mut model, started);
    Ok(model)
}

/// Reconstruction (MSE) training of the autoencoder's encoder, decoder and
/// projection. The embedding stays fixed.
pub fn train_autoencoder(mut model: TrainedModel, train: &[EncodedSequence], val: &[EncodedSequence]) -> Result<TrainedModel> {
    let started = Instant::now();
    let cfg = model.config.clone();
    if train.is_empty() {
        return Err(Error::value("training set is empty"));
    }
    check_lengths(train, cfg.max_sequence_length)?;
    check_lengths(val, cfg.max_sequence_length)?;
    let Network::Autoencoder(ae) = &mut model.network else {
        return Err(Error::State(format!("{} is not an autoencoder", cfg.architecture)));
    };
    let mut adam = Adam::new(cfg.learning_rate, &ae.reconstruction_mut());
    let mut shuffle = rng::seeded(rng::derive_seed(cfg.seed, "shuffle"));
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for idx in shuffled_batches(train.len(), cfg.batch_size, &mut shuffle) {
            zero_grads(&mut ae.reconstruction_mut());
            let loss = ae.reconstruction_loss_and_grad(&refs(train, &idx))?;
            check_loss(loss, epoch)?;
            total += loss * idx.len() as f64;
            adam.step(&mut ae.reconstruction_mut()).map_err(|e| at_epoch(e, epoch))?;
        }
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(mean_over(val.len(), cfg.batch_size, |idx| ae.reconstruction_loss(&refs(val, idx)))?)
        };
        model.history.push(EpochRecord {
            phase: Phase::Reconstruction,
            train_loss: total / train.len() as f64,
            val_loss,
        });
    }
    finish(&mut model, started);
    Ok(model)
}

/// Trains the logistic head on encoder states (and, when configured, fine-
/// tunes the encoder through it).
pub fn fit_autoencoder_head(mut model: TrainedModel, train: &Examples, val: &Examples) -> Result<TrainedModel> {
    let started = Instant::now();
    let cfg = model.config.clone();
    if train.is_empty() {
        return Err(Error::value("training set is empty"));
    }
    check_lengths(&train.seqs, cfg.max_sequence_length)?;
    check_lengths(&val.seqs, cfg.max_sequence_length)?;
    let Network::Autoencoder(ae) = &mut model.network else {
        return Err(Error::State(format!("{} is not an autoencoder", cfg.architecture)));
    };
    let tune = cfg.fine_tune_encoder;
    let mut adam = Adam::new(cfg.head_learning_rate, &ae.classification_mut(tune));
    let mut shuffle = rng::seeded(rng::derive_seed(cfg.seed, "head-shuffle"));
    for epoch in 0..cfg.head_epochs {
        let mut total = 0.0;
        for idx in shuffled_batches(train.len(), cfg.batch_size, &mut shuffle) {
            zero_grads(&mut ae.classification_mut(tune));
            let loss = ae.classification_loss_and_grad(&refs(&train.seqs, &idx), &train.targets(&idx), tune)?;
            check_loss(loss, epoch)?;
            total += loss * idx.len() as f64;
            adam.step(&mut ae.classification_mut(tune)).map_err(|e| at_epoch(e, epoch))?;
        }
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(mean_over(val.len(), cfg.batch_size, |idx| {
                ae.classification_loss(&refs(&val.seqs, idx), &val.targets(idx))
            })?)
        };
        model.history.push(EpochRecord {
            phase: Phase::Classification,
            train_loss: total / train.len() as f64,
            val_loss,
        });
    }
    ae.head_trained = true;
    model.trained = true;
    finish(&mut model, started);
    Ok(model)
}

/// Probabilities from a trained autoencoder head.
pub fn autoencoder_classify(model: &TrainedModel, inputs: &[EncodedSequence]) -> Result<PredictionVector> {
    match &model.network {
        Network::Autoencoder(_) => predict_proba(model, inputs),
        _ => Err(Error::State(format!("{} is not an autoencoder", model.architecture()))),
    }
}

fn train_pooled_head(mut model: TrainedModel, train: &Examples, val: &Examples) -> Result<TrainedModel> {
    let started = Instant::now();
    let cfg = model.config.clone();
    if train.is_empty() {
        return Err(Error::value("training set is empty"));
    }
    let Network::Pooled(net) = &mut model.network else {
        return Err(Error::State(format!("{} is not a pooled classifier", cfg.architecture)));
    };
    let all: Vec<usize> = (0..train.len()).collect();
    let features = net.features(&refs(&train.seqs, &all))?;
    let labels = train.targets(&all);
    let val_features = if val.is_empty() {
        None
    } else {
        let idx: Vec<usize> = (0..val.len()).collect();
        Some((net.features(&refs(&val.seqs, &idx))?, val.targets(&idx)))
    };
    let dim = features.cols();
    let mut adam = Adam::new(cfg.head_learning_rate, &net.head.parameters_mut());
    let mut shuffle = rng::seeded(rng::derive_seed(cfg.seed, "head-shuffle"));
    for epoch in 0..cfg.head_epochs {
        let mut total = 0.0;
        for idx in shuffled_batches(train.len(), cfg.batch_size, &mut shuffle) {
            let mut rows = Vec::with_capacity(idx.len() * dim);
            idx.iter().for_each(|&i| rows.extend_from_slice(features.row(i)));
            let x = Tensor::matrix(idx.len(), dim, rows)?;
            let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            zero_grads(&mut net.head.parameters_mut());
            let loss = net.loss_and_grad(&x, &y)?;
            check_loss(loss, epoch)?;
            total += loss * idx.len() as f64;
            adam.step(&mut net.head.parameters_mut()).map_err(|e| at_epoch(e, epoch))?;
        }
        let val_loss = match &val_features {
            Some((x, y)) => Some(net.loss(x, y)?),
            None => None,
        };
        model.history.push(EpochRecord {
            phase: Phase::Classification,
            train_loss: total / train.len() as f64,
            val_loss,
        });
    }
    model.trained = true;
    finish(&mut model, started);
    Ok(model)
}

/// Mean-pooled embedding classifier: fits a logistic head over `embeddings`
/// on `train` and returns probabilities for `inputs`.
pub fn word2vec_classify(
    embeddings: &EmbeddingMatrix,
    config: &ModelConfig,
    train: &Examples,
    val: &Examples,
    inputs: &[EncodedSequence],
) -> Result<PredictionVector> {
    let model = build_model(config, embeddings.rows() - 2, Some(embeddings))?;
    let model = train_pooled_head(model, train, val)?;
    predict_proba(&model, inputs)
}

/// Skip-gram settings `word2vec_clf` derives from its model config.
pub fn sgns_params(config: &ModelConfig) -> SgnsParams {
    SgnsParams {
        dim: config.embedding_dim,
        window: config.word2vec.window,
        negatives: config.word2vec.negatives,
        lr_start: config.learning_rate,
        lr_end: config.word2vec.lr_end,
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: rng::derive_seed(config.seed, "sgns"),
    }
}

/// Builds and fully trains one Level-0 model.
///
/// `pretrained` is the stacked GloVe+fastText matrix in the stacked mode and
/// `None` in the minimal mode. `word2vec_clf` trains its own skip-gram
/// vectors on `train` and, when `pretrained` is given, pools over the
/// concatenation of both.
pub fn fit(
    config: &ModelConfig,
    vocab_size: usize,
    train: &Examples,
    val: &Examples,
    pretrained: Option<&EmbeddingMatrix>,
) -> Result<TrainedModel> {
    config.validate()?;
    let started = Instant::now();
    let model = match config.architecture {
        Architecture::SimpleRnn | Architecture::Lstm | Architecture::Bilstm => {
            train_classifier(build_model(config, vocab_size, pretrained)?, train, val)?
        }
        Architecture::LstmAutoencoder => {
            let m = build_model(config, vocab_size, pretrained)?;
            let m = train_autoencoder(m, &train.seqs, &val.seqs)?;
            fit_autoencoder_head(m, train, val)?
        }
        Architecture::Word2vecClf => {
            check_lengths(&train.seqs, config.max_sequence_length)?;
            let sgns = train_word2vec_sgns(&train.seqs, vocab_size + 2, &sgns_params(config))?;
            let table = match pretrained {
                Some(extra) => stack_embeddings(&sgns, extra)?,
                None => sgns,
            };
            train_pooled_head(build_model(config, vocab_size, Some(&table))?, train, val)?
        }
    };
    Ok(TrainedModel {
        wall_time: started.elapsed().max(Duration::from_nanos(1)),
        ..model
    })
}

/// Inference with dropout off. Every input must have the configured length.
pub fn predict_proba(model: &TrainedModel, inputs: &[EncodedSequence]) -> Result<PredictionVector> {
    check_lengths(inputs, model.config.max_sequence_length)?;
    let chunk = model.config.batch_size.max(1);
    let mut probs = Vec::with_capacity(inputs.len());
    for idx in ordered_batches(inputs.len(), chunk) {
        let batch = refs(inputs, &idx);
        let p = match &model.network {
            Network::Sequence(m) => m.predict(&batch)?,
            Network::Autoencoder(m) => m.predict(&batch)?,
            Network::Pooled(m) => m.predict(&batch)?,
        };
        probs.extend(p);
    }
    PredictionVector::new(probs)
}
