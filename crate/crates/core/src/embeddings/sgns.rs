use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexer::{EncodedSequence, FIRST_TOKEN_ID};
use crate::nn::{sigmoid_scalar, LinearDecay, Tensor};
use crate::rng;

/// Skip-gram with negative sampling hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgnsParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    /// Pairs per learning-rate step.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgnsParams {
    fn default() -> Self {
        SgnsParams {
            dim: 100,
            window: 5,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 0.001,
            epochs: 5,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl SgnsParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.batch_size == 0 {
            return Err(Error::value("SGNS dim, window and batch_size must be positive"));
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return Err(Error::value(format!(
                "SGNS learning rates need lr_start >= lr_end > 0, got {} -> {}",
                self.lr_start, self.lr_end
            )));
        }
        Ok(())
    }
}

/// Draws negatives from the unigram distribution raised to the 3/4 power.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    ids: Vec<u32>,
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn from_counts(counts: &[(u32, u64)]) -> Result<Self> {
        let ids: Vec<u32> = counts.iter().map(|&(i, _)| i).collect();
        let weights: Vec<f64> = counts.iter().map(|&(_, c)| (c as f64).powf(0.75)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::value(format!("cannot build negative sampler: {e}")))?;
        Ok(NegativeSampler { ids, dist })
    }

    /// Counts of every real token id in `corpus`, ascending by id.
    pub fn from_corpus(corpus: &[EncodedSequence], rows: usize) -> Result<Self> {
        let mut counts = vec![0u64; rows];
        for s in corpus {
            for &id in &s.ids {
                if id >= FIRST_TOKEN_ID && (id as usize) < rows {
                    counts[id as usize] += 1;
                }
            }
        }
        let pairs: Vec<(u32, u64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32, c))
            .collect();
        NegativeSampler::from_counts(&pairs)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.ids[self.dist.sample(rng)]
    }
}

/// `-ln sigmoid(s)` for a positive target, `-ln sigmoid(-s)` for a negative.
fn target_term(score: f64, positive: bool) -> (f64, f64) {
    let p = sigmoid_scalar(score);
    // softplus(-s) = -ln sigmoid(s), computed without overflow
    let softplus = |z: f64| z.max(0.0) + (-z.abs()).exp().ln_1p();
    if positive {
        (softplus(-score), p - 1.0)
    } else {
        (softplus(score), p)
    }
}

/// Loss and gradients of one (center, context) pair with its negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsPairGradients {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `-ln s(u_o.v) - sum_k ln s(-u_k.v)` for center input vector `v`, context
/// output vector `u_o` and negative output vectors `u_k`.
pub fn sgns_pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsPairGradients {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut grad_center = vec![0.0; center.len()];
    let (loss_o, coef_o) = target_term(dot(context, center), true);
    let mut loss = loss_o;
    grad_center
        .iter_mut()
        .zip(context)
        .for_each(|(g, u)| *g += coef_o * u);
    let grad_context = center.iter().map(|v| coef_o * v).collect();
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for u in negatives {
        let (l, coef) = target_term(dot(u, center), false);
        loss += l;
        grad_center.iter_mut().zip(*u).for_each(|(g, u)| *g += coef * u);
        grad_negs.push(center.iter().map(|v| coef * v).collect());
    }
    SgnsPairGradients {
        loss,
        center: grad_center,
        context: grad_context,
        negatives: grad_negs,
    }
}

/// Applies one SGD step to the output rows of `targets` (context first, then
/// negatives) and accumulates the center-vector gradient into `grad_center`.
/// Every gradient is taken at the pre-update parameters.
pub(crate) fn pair_step(
    center: &[f64],
    outputs: &mut Tensor,
    targets: &[(usize, bool)],
    lr: f64,
    grad_center: &mut [f64],
) -> f64 {
    grad_center.fill(0.0);
    let mut loss = 0.0;
    for &(row, positive) in targets {
        let u = outputs.row_mut(row);
        let score: f64 = u.iter().zip(center).map(|(a, b)| a * b).sum();
        let (l, coef) = target_term(score, positive);
        loss += l;
        for k in 0..center.len() {
            grad_center[k] += coef * u[k];
            u[k] -= lr * coef * center[k];
        }
    }
    loss
}

/// Seeded `uniform(-0.5/d, 0.5/d)` input vectors; rows 0 and 1 stay zero.
pub fn init_input_vectors(rows: usize, dim: usize, seed: u64) -> Tensor {
    let mut rng = rng::seeded(seed);
    let bound = 0.5 / dim as f64;
    let mut t = Tensor::zeros(&[rows, dim]);
    for r in FIRST_TOKEN_ID as usize..rows {
        for v in t.row_mut(r) {
            *v = rng.random_range(-bound..bound);
        }
    }
    t
}

/// (center position, context position) pairs of one sequence.
pub(crate) fn window_pairs(ids: &[u32], window: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let valid = |id: u32| id >= FIRST_TOKEN_ID;
    ids.iter().enumerate().flat_map(move |(p, &c)| {
        let lo = p.saturating_sub(window);
        let hi = (p + window).min(ids.len().saturating_sub(1));
        (lo..=hi)
            .filter(move |&q| q != p && valid(c) && valid(ids[q]))
            .map(move |q| (p, q))
    })
}

/// Per-pair SGD with negatives; the learning rate is held for `batch_size`
/// pairs, then decays linearly toward `lr_end` over the whole run.
pub(crate) struct SgnsSchedule {
    decay: LinearDecay,
    batch_size: usize,
    pairs_seen: usize,
}

impl SgnsSchedule {
    pub(crate) fn new(params: &SgnsParams, pairs_per_epoch: usize) -> Self {
        let batches_per_epoch = pairs_per_epoch.div_ceil(params.batch_size);
        SgnsSchedule {
            decay: LinearDecay {
                lr_start: params.lr_start,
                lr_end: params.lr_end,
                total_steps: batches_per_epoch * params.epochs,
            },
            batch_size: params.batch_size,
            pairs_seen: 0,
        }
    }

    pub(crate) fn next_lr(&mut self) -> f64 {
        let lr = self.decay.lr_at(self.pairs_seen / self.batch_size);
        self.pairs_seen += 1;
        lr
    }
}

pub(crate) fn draw_targets(
    context: u32,
    negatives: usize,
    sampler: &NegativeSampler,
    rng: &mut impl Rng,
    out: &mut Vec<(usize, bool)>,
) {
    out.clear();
    out.push((context as usize, true));
    for _ in 0..negatives {
        let n = sampler.sample(rng);
        if n != context {
            out.push((n as usize, false));
        }
    }
}

/// Skip-gram word2vec with negative sampling over encoded sequences.
/// Returns the input vectors.
pub fn train_word2vec_sgns(corpus: &[EncodedSequence], rows: usize, params: &SgnsParams) -> Result<EmbeddingMatrix> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::value("word2vec corpus is empty"));
    }
    if let Some(bad) = corpus.iter().flat_map(|s| &s.ids).find(|&&id| id as usize >= rows) {
        return Err(Error::shape(format!("token id {bad} outside {rows} embedding rows")));
    }
    let d = params.dim;
    let mut input = init_input_vectors(rows, d, params.seed);
    if params.epochs == 0 {
        return EmbeddingMatrix::new(input);
    }
    let Ok(sampler) = NegativeSampler::from_corpus(corpus, rows) else {
        // no real tokens at all: nothing to learn
        return EmbeddingMatrix::new(input);
    };
    let mut output = Tensor::zeros(&[rows, d]);
    let pairs_per_epoch: usize = corpus
        .iter()
        .map(|s| window_pairs(&s.ids, params.window).count())
        .sum();
    let mut schedule = SgnsSchedule::new(params, pairs_per_epoch);
    let mut rng = rng::seeded(rng::derive_seed(params.seed, "sgns-train"));
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut grad = vec![0.0; d];
    let mut targets = Vec::with_capacity(params.negatives + 1);
    let mut center = vec![0.0; d];

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &si in &order {
            let ids = &corpus[si].ids;
            for (p, q) in window_pairs(ids, params.window) {
                let lr = schedule.next_lr();
                let c = ids[p] as usize;
                draw_targets(ids[q], params.negatives, &sampler, &mut rng, &mut targets);
                center.copy_from_slice(input.row(c));
                loss += pair_step(&center, &mut output, &targets, lr, &mut grad);
                input
                    .row_mut(c)
                    .iter_mut()
                    .zip(&grad)
                    .for_each(|(v, g)| *v -= lr * g);
            }
        }
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "word2vec loss is not finite".into(),
            });
        }
    }
    EmbeddingMatrix::new(input)
}
