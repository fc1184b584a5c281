use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CooccurrenceMatrix, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::lexer::FIRST_TOKEN_ID;
use crate::nn::Tensor;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GloveParams {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub x_max: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for GloveParams {
    fn default() -> Self {
        GloveParams {
            dim: 50,
            epochs: 25,
            learning_rate: 0.05,
            x_max: 100.0,
            alpha: 0.75,
            seed: 0,
        }
    }
}

/// `(x / x_max)^alpha` below `x_max`, 1 above.
pub fn glove_weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

#[derive(Clone, Debug)]
pub struct GloveTraining {
    /// `w + w~` per token.
    pub embeddings: EmbeddingMatrix,
    /// Sum over entries of `f(X_ij) (w_i.w~_j + b_i + b~_j - ln X_ij)^2`,
    /// accumulated during each epoch.
    pub epoch_losses: Vec<f64>,
    pub main: Tensor,
    pub context: Tensor,
    pub main_bias: Vec<f64>,
    pub context_bias: Vec<f64>,
}

impl GloveTraining {
    /// `w_i . w~_j + b_i + b~_j - ln x` at the final parameters.
    pub fn residual(&self, i: u32, j: u32, x: f64) -> f64 {
        let (i, j) = (i as usize, j as usize);
        let dot: f64 = self
            .main
            .row(i)
            .iter()
            .zip(self.context.row(j))
            .map(|(a, b)| a * b)
            .sum();
        dot + self.main_bias[i] + self.context_bias[j] - x.ln()
    }
}

/// Weighted least squares on log co-occurrences with AdaGrad, one update
/// per non-zero entry per epoch in a seeded shuffled order.
pub fn train_glove(cooc: &CooccurrenceMatrix, rows: usize, params: &GloveParams) -> Result<GloveTraining> {
    if cooc.is_empty() {
        return Err(Error::value("co-occurrence matrix is empty"));
    }
    if let Some(max) = cooc.max_index() {
        if max as usize >= rows {
            return Err(Error::shape(format!(
                "co-occurrence index {max} outside {rows} embedding rows"
            )));
        }
    }
    if params.dim == 0 {
        return Err(Error::value("GloVe dimension must be positive"));
    }
    let d = params.dim;
    let mut rng = rng::seeded(params.seed);
    let bound = 0.5 / d as f64;
    let init = |rng: &mut rng::Rng| {
        let mut t = Tensor::zeros(&[rows, d]);
        for r in FIRST_TOKEN_ID as usize..rows {
            for v in t.row_mut(r) {
                *v = rng.random_range(-bound..bound);
            }
        }
        t
    };
    let mut w = init(&mut rng);
    let mut wc = init(&mut rng);
    let mut b = vec![0.0; rows];
    let mut bc = vec![0.0; rows];
    // AdaGrad accumulators start at 1 so the first steps are not huge.
    let mut gw = Tensor::full(&[rows, d], 1.0);
    let mut gwc = Tensor::full(&[rows, d], 1.0);
    let mut gb = vec![1.0_f64; rows];
    let mut gbc = vec![1.0_f64; rows];

    let entries: Vec<(usize, usize, f64)> = cooc
        .iter()
        .map(|(i, j, x)| (i as usize, j as usize, x))
        .collect();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    let lr = params.learning_rate;
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mut grad_i = vec![0.0; d];
    let mut grad_j = vec![0.0; d];

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &e in &order {
            let (i, j, x) = entries[e];
            let wi = w.row(i);
            let wj = wc.row(j);
            let dot: f64 = wi.iter().zip(wj).map(|(a, b)| a * b).sum();
            let diff = dot + b[i] + bc[j] - x.ln();
            let f = glove_weight(x, params.x_max, params.alpha);
            loss += f * diff * diff;
            // Gradient of half the weighted squared residual.
            let fdiff = f * diff;
            for k in 0..d {
                grad_i[k] = fdiff * wj[k];
                grad_j[k] = fdiff * wi[k];
            }
            let (wi, gwi) = (w.row_mut(i), gw.row_mut(i));
            for k in 0..d {
                wi[k] -= lr * grad_i[k] / gwi[k].sqrt();
                gwi[k] += grad_i[k] * grad_i[k];
            }
            let (wj, gwj) = (wc.row_mut(j), gwc.row_mut(j));
            for k in 0..d {
                wj[k] -= lr * grad_j[k] / gwj[k].sqrt();
                gwj[k] += grad_j[k] * grad_j[k];
            }
            b[i] -= lr * fdiff / gb[i].sqrt();
            gb[i] += fdiff * fdiff;
            bc[j] -= lr * fdiff / gbc[j].sqrt();
            gbc[j] += fdiff * fdiff;
        }
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "GloVe loss is not finite".into(),
            });
        }
        epoch_losses.push(loss);
    }

    let mut sum = w.clone();
    sum.add_assign(&wc)?;
    for r in 0..(FIRST_TOKEN_ID as usize).min(rows) {
        sum.row_mut(r).fill(0.0);
    }
    Ok(GloveTraining {
        embeddings: EmbeddingMatrix::new(sum)?,
        epoch_losses,
        main: w,
        context: wc,
        main_bias: b,
        context_bias: bc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::cosine;

    #[test]
    fn weighting_function() {
        assert_eq!(glove_weight(100.0, 100.0, 0.75), 1.0);
        assert_eq!(glove_weight(250.0, 100.0, 0.75), 1.0);
        assert!((glove_weight(1.0, 100.0, 0.75) - 0.01f64.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn single_entry_residual_converges() {
        let cooc = CooccurrenceMatrix::from_entries([(2, 3, 1.0)], 1).unwrap();
        let params = GloveParams {
            dim: 2,
            epochs: 3000,
            ..Default::default()
        };
        let t = train_glove(&cooc, 4, &params).unwrap();
        let r = t.residual(2, 3, 1.0);
        assert!(r * r < 1e-4, "residual {r}");
    }

    #[test]
    fn identical_rows_give_similar_vectors() {
        // Tokens 2 and 3 co-occur with 4..12 with identical weights.
        let mut entries = Vec::new();
        for ctx in 4..12u32 {
            let x = 1.0 + f64::from(ctx % 5) * 3.0;
            entries.push((2, ctx, x));
            entries.push((3, ctx, x));
            entries.push((ctx, ctx + 1, 2.0));
        }
        let cooc = CooccurrenceMatrix::from_entries(entries, 1).unwrap();
        let params = GloveParams {
            dim: 4,
            epochs: 400,
            seed: 5,
            ..Default::default()
        };
        let t = train_glove(&cooc, 13, &params).unwrap();
        let c = cosine(t.embeddings.row(2), t.embeddings.row(3));
        assert!(c > 0.9, "cosine {c}");
    }

    #[test]
    fn empty_matrix_rejected() {
        let cooc = CooccurrenceMatrix::from_entries([], 1).unwrap();
        assert!(train_glove(&cooc, 4, &GloveParams::default()).is_err());
    }
}
