use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sgns::{draw_targets, pair_step, window_pairs, NegativeSampler, SgnsParams, SgnsSchedule};
use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexer::{encode, TokenSequence, Vocabulary, FIRST_TOKEN_ID};
use crate::nn::Tensor;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FastTextParams {
    pub dim: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub bucket_count: usize,
    pub window: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FastTextParams {
    fn default() -> Self {
        FastTextParams {
            dim: 50,
            n_min: 3,
            n_max: 6,
            bucket_count: 1 << 16,
            window: 5,
            negatives: 5,
            lr_start: 0.05,
            lr_end: 0.001,
            epochs: 5,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl FastTextParams {
    fn sgns(&self) -> SgnsParams {
        SgnsParams {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }
}

/// 32-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Character n-grams of `<word>` for every length in `n_min..=n_max`,
/// followed by the whole wrapped word. Duplicates are dropped.
pub fn extract_ngrams(word: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let wrapped: Vec<char> = format!("<{word}>").chars().collect();
    let whole: String = wrapped.iter().collect();
    let mut out: Vec<String> = Vec::new();
    for n in n_min.max(1)..=n_max.min(wrapped.len()) {
        for window in wrapped.windows(n) {
            let g: String = window.iter().collect();
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    if !out.contains(&whole) {
        out.push(whole);
    }
    out
}

/// Hashed n-gram vector table.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordIndex {
    pub n_min: usize,
    pub n_max: usize,
    pub bucket_count: usize,
    pub ngram_vectors: Tensor,
}

impl SubwordIndex {
    pub fn dim(&self) -> usize {
        self.ngram_vectors.shape()[1]
    }

    pub fn bucket(&self, ngram: &str) -> usize {
        fnv1a(ngram.as_bytes()) as usize % self.bucket_count
    }

    pub fn buckets(&self, word: &str) -> Vec<usize> {
        extract_ngrams(word, self.n_min, self.n_max)
            .iter()
            .map(|g| self.bucket(g))
            .collect()
    }
}

/// Word table, n-gram table and the vocabulary aligning the word rows.
#[derive(Clone, Debug, PartialEq)]
pub struct FastTextModel {
    pub vocab: Vocabulary,
    pub words: EmbeddingMatrix,
    pub subwords: SubwordIndex,
}

impl FastTextModel {
    /// Mean of the word's own vector (if in vocabulary) and its n-gram
    /// bucket vectors.
    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        let d = self.subwords.dim();
        let mut acc = vec![0.0; d];
        let mut parts = 0usize;
        if let Some(i) = self.vocab.get(word) {
            acc.iter_mut()
                .zip(self.words.row(i as usize))
                .for_each(|(a, v)| *a += v);
            parts += 1;
        }
        for b in self.subwords.buckets(word) {
            acc.iter_mut()
                .zip(self.subwords.ngram_vectors.row(b))
                .for_each(|(a, v)| *a += v);
            parts += 1;
        }
        let n = parts.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Composed vector for every vocabulary row; rows 0 and 1 are zero.
    pub fn composed_matrix(&self) -> Result<EmbeddingMatrix> {
        let mut t = Tensor::zeros(&[self.vocab.rows(), self.subwords.dim()]);
        for (i, token) in self.vocab.iter() {
            t.row_mut(i as usize).copy_from_slice(&self.word_vector(token));
        }
        EmbeddingMatrix::new(t)
    }
}

pub fn word_vector_fasttext(word: &str, model: &FastTextModel) -> Vec<f64> {
    model.word_vector(word)
}

/// Skip-gram with negative sampling where each center word's input vector
/// is the mean of its word vector and n-gram vectors. Tokens outside
/// `vocab` are skipped.
pub fn train_fasttext(corpus: &[TokenSequence], vocab: &Vocabulary, params: &FastTextParams) -> Result<FastTextModel> {
    let sgns = params.sgns();
    sgns.validate()?;
    if corpus.iter().all(TokenSequence::is_empty) {
        return Err(Error::value("fastText corpus is empty"));
    }
    if params.n_min == 0 || params.n_min > params.n_max || params.bucket_count == 0 {
        return Err(Error::value(format!(
            "invalid n-gram settings {}..{} with {} buckets",
            params.n_min, params.n_max, params.bucket_count
        )));
    }
    let d = params.dim;
    let rows = vocab.rows();
    let mut rng = rng::seeded(params.seed);
    let bound = 1.0 / d as f64;
    let mut words = Tensor::zeros(&[rows, d]);
    for r in FIRST_TOKEN_ID as usize..rows {
        for v in words.row_mut(r) {
            *v = rng.random_range(-bound..bound);
        }
    }
    let ngram_vectors = Tensor::uniform(&[params.bucket_count, d], bound, &mut rng);
    let mut subwords = SubwordIndex {
        n_min: params.n_min,
        n_max: params.n_max,
        bucket_count: params.bucket_count,
        ngram_vectors,
    };

    let encoded: Vec<_> = corpus
        .iter()
        .map(|s| encode(s, vocab, s.len().max(1)))
        .collect();
    let pairs_per_epoch: usize = encoded
        .iter()
        .map(|s| window_pairs(&s.ids, params.window).count())
        .sum();
    if params.epochs > 0 && pairs_per_epoch > 0 {
        let buckets: Vec<Vec<usize>> = (0..rows as u32)
            .map(|i| vocab.token(i).map(|t| subwords.buckets(t)).unwrap_or_default())
            .collect();
        let sampler = NegativeSampler::from_corpus(&encoded, rows)?;
        let mut output = Tensor::zeros(&[rows, d]);
        let mut schedule = SgnsSchedule::new(&sgns, pairs_per_epoch);
        let mut train_rng = rng::seeded(rng::derive_seed(params.seed, "fasttext-train"));
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        let mut center = vec![0.0; d];
        let mut grad = vec![0.0; d];
        let mut targets = Vec::with_capacity(params.negatives + 1);

        for epoch in 0..params.epochs {
            order.shuffle(&mut train_rng);
            let mut loss = 0.0;
            for &si in &order {
                let ids = &encoded[si].ids;
                for (p, q) in window_pairs(ids, params.window) {
                    let lr = schedule.next_lr();
                    let c = ids[p] as usize;
                    let parts = &buckets[c];
                    let scale = 1.0 / (parts.len() + 1) as f64;
                    center.copy_from_slice(words.row(c));
                    for &b in parts {
                        center
                            .iter_mut()
                            .zip(subwords.ngram_vectors.row(b))
                            .for_each(|(a, v)| *a += v);
                    }
                    center.iter_mut().for_each(|a| *a *= scale);

                    draw_targets(ids[q], params.negatives, &sampler, &mut train_rng, &mut targets);
                    loss += pair_step(&center, &mut output, &targets, lr, &mut grad);
                    // d(mean)/d(component) = 1/k
                    let step = lr * scale;
                    words
                        .row_mut(c)
                        .iter_mut()
                        .zip(&grad)
                        .for_each(|(v, g)| *v -= step * g);
                    for &b in parts {
                        subwords
                            .ngram_vectors
                            .row_mut(b)
                            .iter_mut()
                            .zip(&grad)
                            .for_each(|(v, g)| *v -= step * g);
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: "fastText loss is not finite".into(),
                });
            }
        }
    }
    Ok(FastTextModel {
        vocab: vocab.clone(),
        words: EmbeddingMatrix::new(words)?,
        subwords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ngram_examples() {
        assert_eq!(extract_ngrams("cat", 3, 3), vec!["<ca", "cat", "at>", "<cat>"]);
        assert_eq!(extract_ngrams("a", 3, 3), vec!["<a>"]);
        assert_eq!(extract_ngrams("ab", 5, 6), vec!["<ab>"]);
        assert_eq!(extract_ngrams("ab", 2, 2), vec!["<a", "ab", "b>", "<ab>"]);
    }

    #[test]
    fn ngrams_are_char_based() {
        let g = extract_ngrams("groß", 3, 3);
        assert!(g.contains(&"oß>".to_string()));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0x811c9dc5);
        assert_eq!(fnv1a(b"a"), 0xe40c292c);
        assert_eq!(fnv1a(b"foobar"), 0xbf9cf968);
    }

    #[test]
    fn buckets_stay_in_range() {
        let idx = SubwordIndex {
            n_min: 3,
            n_max: 6,
            bucket_count: 97,
            ngram_vectors: Tensor::zeros(&[97, 2]),
        };
        for w in ["strcpy(buf,", "{\n", "x", "ノドアカ"] {
            assert!(idx.buckets(w).iter().all(|&b| b < 97));
        }
    }
}
