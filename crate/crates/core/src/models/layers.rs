use crate::error::{Error, Result};
use crate::lexer::{EncodedSequence, PAD_ID};
use crate::nn::{dropout_mask, Parameter, Tensor};
use crate::rng::Rng;

/// Time-major batch of vectors: row `(t, b)` lives at `(t * batch + b) * dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Seq {
    pub steps: usize,
    pub batch: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Seq {
    pub fn zeros(steps: usize, batch: usize, dim: usize) -> Self {
        Seq {
            steps,
            batch,
            dim,
            data: vec![0.0; steps * batch * dim],
        }
    }

    /// All batch rows of step `t`, as a `batch x dim` block.
    pub fn at(&self, t: usize) -> &[f64] {
        let n = self.batch * self.dim;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn at_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.batch * self.dim;
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn row(&self, t: usize, b: usize) -> &[f64] {
        let o = (t * self.batch + b) * self.dim;
        &self.data[o..o + self.dim]
    }

    pub fn row_mut(&mut self, t: usize, b: usize) -> &mut [f64] {
        let o = (t * self.batch + b) * self.dim;
        &mut self.data[o..o + self.dim]
    }
}

/// Which `(step, batch row)` cells hold a real token.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub steps: usize,
    pub batch: usize,
    valid: Vec<bool>,
}

impl Mask {
    pub fn from_lengths(lengths: &[usize], steps: usize) -> Self {
        let batch = lengths.len();
        let mut valid = vec![false; steps * batch];
        for (b, &len) in lengths.iter().enumerate() {
            for t in 0..len.min(steps) {
                valid[t * batch + b] = true;
            }
        }
        Mask { steps, batch, valid }
    }

    pub fn all_valid(steps: usize, batch: usize) -> Self {
        Mask {
            steps,
            batch,
            valid: vec![true; steps * batch],
        }
    }

    pub fn is_valid(&self, t: usize, b: usize) -> bool {
        self.valid[t * self.batch + b]
    }

    pub fn count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Steps needed to cover every real token in the batch (at least one).
/// Trailing all-padding steps only carry state, so they are skipped.
pub fn batch_steps(seqs: &[&EncodedSequence]) -> usize {
    seqs.iter().map(|s| s.valid_len()).max().unwrap_or(0).max(1)
}

/// Token lookup table. Row 0 is padding and never receives gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub table: Parameter,
    pub trainable: bool,
}

impl Embedding {
    pub fn new(table: Tensor, trainable: bool) -> Self {
        Embedding {
            table: Parameter::new(table),
            trainable,
        }
    }

    pub fn rows(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn lookup(&self, seqs: &[&EncodedSequence]) -> Result<(Seq, Mask)> {
        let steps = batch_steps(seqs);
        let (batch, dim, rows) = (seqs.len(), self.dim(), self.rows());
        let mut out = Seq::zeros(steps, batch, dim);
        let mut lengths = Vec::with_capacity(batch);
        for (b, s) in seqs.iter().enumerate() {
            let len = s.valid_len();
            lengths.push(len);
            for (t, &id) in s.ids.iter().take(steps).enumerate() {
                let id = id as usize;
                if id >= rows {
                    return Err(Error::shape(format!("token id {id} outside {rows} embedding rows")));
                }
                if id != PAD_ID as usize {
                    out.row_mut(t, b).copy_from_slice(self.table.value.row(id));
                }
            }
        }
        Ok((out, Mask::from_lengths(&lengths, steps)))
    }

    pub fn backward(&mut self, seqs: &[&EncodedSequence], dx: &Seq) {
        if !self.trainable {
            return;
        }
        for (b, s) in seqs.iter().enumerate() {
            for (t, &id) in s.ids.iter().take(dx.steps).enumerate() {
                if id == PAD_ID {
                    continue;
                }
                let g = self.table.grad.row_mut(id as usize);
                g.iter_mut().zip(dx.row(t, b)).for_each(|(a, d)| *a += d);
            }
        }
    }
}

/// Draws an inverted-dropout mask for `len` values, or `None` when dropout
/// is inactive.
pub(crate) fn draw_dropout(len: usize, rate: f64, rng: Option<&mut Rng>) -> Option<Vec<f64>> {
    match rng {
        Some(rng) if rate > 0.0 => Some(dropout_mask(len, rate, rng)),
        _ => None,
    }
}

pub(crate) fn apply_mask(values: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        values.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
    }
}

/// Numerically stable `-[y ln p + (1 - y) ln(1 - p)]` computed from the logit,
/// with `p` clamped the same way as [`crate::nn::bce_loss`].
pub(crate) fn bce_from_logit(logit: f64, y: f64) -> f64 {
    let p = crate::nn::sigmoid_scalar(logit).clamp(crate::nn::BCE_EPSILON, 1.0 - crate::nn::BCE_EPSILON);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}
