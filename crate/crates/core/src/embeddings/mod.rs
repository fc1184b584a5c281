//! Token vectors: GloVe trained on a co-occurrence matrix, fastText-style
//! subword composition, skip-gram word2vec with negative sampling, and the
//! concatenation ("stacking") of GloVe and fastText.
//!
//! All trainers leave rows 0 (padding) and 1 (out-of-vocabulary) at zero.

mod cooc;
mod glove;
mod sgns;
mod subword;

use std::fs;
use std::path::Path;

pub use cooc::{build_cooccurrence, CooccurrenceMatrix};
pub use glove::{glove_weight, train_glove, GloveParams, GloveTraining};
pub use sgns::{
    init_input_vectors, sgns_pair_loss, train_word2vec_sgns, NegativeSampler, SgnsParams,
    SgnsPairGradients,
};
pub use subword::{
    extract_ngrams, fnv1a, train_fasttext, word_vector_fasttext, FastTextModel, FastTextParams,
    SubwordIndex,
};

use crate::error::{Error, Result};
use crate::lexer::{escape_token, unescape_token, Vocabulary};
use crate::nn::Tensor;

/// Per-token dense vectors; row 0 is the padding row and always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    vectors: Tensor,
}

impl EmbeddingMatrix {
    pub fn new(vectors: Tensor) -> Result<Self> {
        if vectors.shape().len() != 2 {
            return Err(Error::shape(format!(
                "embedding matrix must be 2-D, got {:?}",
                vectors.shape()
            )));
        }
        if !vectors.is_finite() {
            return Err(Error::value("embedding matrix has non-finite entries"));
        }
        if vectors.row(0).iter().any(|&v| v != 0.0) {
            return Err(Error::value("padding row of an embedding matrix must be zero"));
        }
        Ok(EmbeddingMatrix { vectors })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            vectors: Tensor::zeros(&[rows, dim]),
        }
    }

    pub fn rows(&self) -> usize {
        self.vectors.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.vectors
    }

    pub fn into_tensor(self) -> Tensor {
        self.vectors
    }

    /// `<token> <v1> ... <vd>` per vocabulary token, in index order.
    pub fn to_text(&self, vocab: &Vocabulary) -> Result<String> {
        if vocab.rows() != self.rows() {
            return Err(Error::shape(format!(
                "vocabulary needs {} rows, matrix has {}",
                vocab.rows(),
                self.rows()
            )));
        }
        let mut out = String::new();
        for (i, token) in vocab.iter() {
            out.push_str(&escape_token(token));
            for v in self.row(i as usize) {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses the text format against `vocab`. Tokens outside the
    /// vocabulary are skipped; vocabulary tokens absent from the file keep
    /// a zero row.
    pub fn from_text(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let (tokens, rows) = parse_text(text)?;
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::Format("embedding file has no vectors".into()));
        }
        let mut m = Tensor::zeros(&[vocab.rows(), dim]);
        for (t, v) in tokens.iter().zip(&rows) {
            if let Some(i) = vocab.get(t) {
                m.row_mut(i as usize).copy_from_slice(v);
            }
        }
        EmbeddingMatrix::new(m)
    }

    pub fn save(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        fs::write(path, self.to_text(vocab)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmbeddingMatrix::from_text(&text, vocab)
    }
}

/// Raw `(tokens, vectors)` from the text format.
pub fn parse_text(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut tokens = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let token = unescape_token(parts.next().unwrap_or_default())?;
        let values = parts
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::Format(format!("embedding line {}: bad number {s:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(Error::Format(format!(
                    "embedding line {}: {} values, expected {}",
                    lineno + 1,
                    values.len(),
                    first.len()
                )));
            }
        }
        tokens.push(token);
        rows.push(values);
    }
    Ok((tokens, rows))
}

/// Row-wise concatenation, GloVe columns first.
pub fn stack_embeddings(glove: &EmbeddingMatrix, fasttext: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if glove.rows() != fasttext.rows() {
        return Err(Error::shape(format!(
            "cannot stack {} rows with {} rows",
            glove.rows(),
            fasttext.rows()
        )));
    }
    let (d1, d2) = (glove.dim(), fasttext.dim());
    let mut out = Tensor::zeros(&[glove.rows(), d1 + d2]);
    for r in 0..glove.rows() {
        let row = out.row_mut(r);
        row[..d1].copy_from_slice(glove.row(r));
        row[d1..].copy_from_slice(fasttext.row(r));
    }
    EmbeddingMatrix::new(out)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
