use super::classifier::check_labels;
use super::layers::bce_from_logit;
use crate::error::{Error, Result};
use crate::lexer::{EncodedSequence, PAD_ID};
use crate::nn::{sigmoid_scalar, Dense, Parameter, Tensor};
use crate::rng::Rng;

/// Mean of a function's token vectors followed by logistic regression.
/// The vector table is fixed; only the head learns.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingClassifier {
    pub table: Parameter,
    pub head: Dense,
}

impl EmbeddingClassifier {
    pub fn new(table: Tensor, rng: &mut Rng) -> Self {
        let dim = table.cols();
        EmbeddingClassifier {
            table: Parameter::new(table),
            head: Dense::new(dim, 1, rng),
        }
    }

    /// One row per sequence: mean over non-padding positions, zero when the
    /// sequence is all padding.
    pub fn features(&self, seqs: &[&EncodedSequence]) -> Result<Tensor> {
        let (rows, dim) = (self.table.shape()[0], self.table.shape()[1]);
        let mut out = Tensor::zeros(&[seqs.len(), dim]);
        for (b, s) in seqs.iter().enumerate() {
            let acc = out.row_mut(b);
            let mut n = 0usize;
            for &id in s.ids.iter().filter(|&&id| id != PAD_ID) {
                let id = id as usize;
                if id >= rows {
                    return Err(Error::shape(format!("token id {id} outside {rows} embedding rows")));
                }
                acc.iter_mut()
                    .zip(self.table.value.row(id))
                    .for_each(|(a, v)| *a += v);
                n += 1;
            }
            if n > 0 {
                acc.iter_mut().for_each(|a| *a /= n as f64);
            }
        }
        Ok(out)
    }

    pub fn predict_features(&self, features: &Tensor) -> Result<Vec<f64>> {
        Ok(self
            .head
            .forward(features)?
            .into_data()
            .into_iter()
            .map(sigmoid_scalar)
            .collect())
    }

    pub fn predict(&self, seqs: &[&EncodedSequence]) -> Result<Vec<f64>> {
        self.predict_features(&self.features(seqs)?)
    }

    /// Mean BCE of the head on precomputed features, accumulating head grads.
    pub fn loss_and_grad(&mut self, features: &Tensor, labels: &[f64]) -> Result<f64> {
        check_labels(features.rows(), labels)?;
        let logits = self.head.forward(features)?.into_data();
        let n = labels.len() as f64;
        let mut loss = 0.0;
        let mut dlogit = Tensor::zeros(&[labels.len(), 1]);
        for (b, (&z, &y)) in logits.iter().zip(labels).enumerate() {
            loss += bce_from_logit(z, y);
            dlogit.data_mut()[b] = (sigmoid_scalar(z) - y) / n;
        }
        self.head.backward(features, &dlogit);
        Ok(loss / n)
    }

    pub fn loss(&self, features: &Tensor, labels: &[f64]) -> Result<f64> {
        check_labels(features.rows(), labels)?;
        let logits = self.head.forward(features)?.into_data();
        Ok(logits.iter().zip(labels).map(|(&z, &y)| bce_from_logit(z, y)).sum::<f64>() / labels.len() as f64)
    }

    pub fn parameters(&self) -> Vec<(String, &Parameter)> {
        vec![
            ("embedding.table".into(), &self.table),
            ("head.weight".into(), &self.head.weight),
            ("head.bias".into(), &self.head.bias),
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.table, &mut self.head.weight, &mut self.head.bias]
    }
}
