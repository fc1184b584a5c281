use super::layers::{bce_from_logit, Embedding, Mask};
use super::recurrent::{CellKind, RecurrentStack, StackCache};
use crate::error::{Error, Result};
use crate::lexer::EncodedSequence;
use crate::nn::{sigmoid_scalar, Dense, Parameter, Tensor};
use crate::rng::Rng;

/// Embedding, recurrent stack, and a one-unit sigmoid readout over the final
/// hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceClassifier {
    pub embedding: Embedding,
    pub stack: RecurrentStack,
    pub head: Dense,
}

pub struct ClassifierCache {
    mask: Mask,
    stack: StackCache,
    features: Tensor,
}

impl SequenceClassifier {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        embedding: Embedding,
        cell: CellKind,
        hidden: usize,
        layers: usize,
        bidirectional: bool,
        dropout_rate: f64,
        rng: &mut Rng,
    ) -> Self {
        let stack = RecurrentStack::new(cell, embedding.dim(), hidden, layers, bidirectional, dropout_rate, rng);
        let head = Dense::new(stack.output_size(), 1, rng);
        SequenceClassifier { embedding, stack, head }
    }

    pub fn forward(&self, seqs: &[&EncodedSequence], rng: Option<&mut Rng>) -> Result<(Vec<f64>, ClassifierCache)> {
        let (x, mask) = self.embedding.lookup(seqs)?;
        let stack = self.stack.forward(x, &mask, rng)?;
        let features = self.stack.final_features(&stack.output);
        let logits = self.head.forward(&features)?.into_data();
        Ok((logits, ClassifierCache { mask, stack, features }))
    }

    pub fn predict(&self, seqs: &[&EncodedSequence]) -> Result<Vec<f64>> {
        let (logits, _) = self.forward(seqs, None)?;
        Ok(logits.into_iter().map(sigmoid_scalar).collect())
    }

    /// Mean binary cross-entropy of the batch; with `rng` set, dropout is
    /// active. Gradients are added to every parameter's `grad`.
    pub fn loss_and_grad(&mut self, seqs: &[&EncodedSequence], labels: &[f64], rng: Option<&mut Rng>) -> Result<f64> {
        check_labels(seqs.len(), labels)?;
        let (logits, cache) = self.forward(seqs, rng)?;
        let n = seqs.len() as f64;
        let mut loss = 0.0;
        let mut dlogit = Tensor::zeros(&[seqs.len(), 1]);
        for (b, (&z, &y)) in logits.iter().zip(labels).enumerate() {
            loss += bce_from_logit(z, y);
            dlogit.data_mut()[b] = (sigmoid_scalar(z) - y) / n;
        }
        let dfeat = self.head.backward(&cache.features, &dlogit);
        let dout = self.stack.scatter_features(&dfeat, cache.stack.output.steps);
        let dx = self.stack.backward(&cache.mask, &cache.stack, dout);
        self.embedding.backward(seqs, &dx);
        Ok(loss / n)
    }

    pub fn loss(&self, seqs: &[&EncodedSequence], labels: &[f64]) -> Result<f64> {
        check_labels(seqs.len(), labels)?;
        let (logits, _) = self.forward(seqs, None)?;
        let total: f64 = logits.iter().zip(labels).map(|(&z, &y)| bce_from_logit(z, y)).sum();
        Ok(total / seqs.len() as f64)
    }

    pub fn parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out = vec![("embedding.table".to_string(), &self.embedding.table)];
        out.extend(self.stack.parameters());
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    /// All parameters in [`SequenceClassifier::parameters`] order.
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.embedding.table];
        out.extend(self.stack.parameters_mut());
        out.extend(self.head.parameters_mut());
        out
    }

    /// Parameters the optimizer updates (a frozen embedding is left out).
    pub fn trainable_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        if self.embedding.trainable {
            out.push(&mut self.embedding.table);
        }
        out.extend(self.stack.parameters_mut());
        out.extend(self.head.parameters_mut());
        out
    }
}

pub(crate) fn check_labels(n: usize, labels: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::value("empty batch"));
    }
    if labels.len() != n {
        return Err(Error::shape(format!("{n} sequences but {} labels", labels.len())));
    }
    Ok(())
}
