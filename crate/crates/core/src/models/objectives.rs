//! Loss closures over whole models, for finite-difference gradient checks.

use super::{LstmAutoencoder, SequenceClassifier};
use crate::lexer::EncodedSequence;
use crate::nn::{Differentiable, Parameter};

fn refs(seqs: &[EncodedSequence]) -> Vec<&EncodedSequence> {
    seqs.iter().collect()
}

/// Mean BCE of a recurrent classifier on a fixed batch, dropout off.
pub struct ClassifierObjective {
    pub model: SequenceClassifier,
    pub seqs: Vec<EncodedSequence>,
    pub labels: Vec<f64>,
}

impl Differentiable for ClassifierObjective {
    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.parameters_mut()
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.model.parameters_mut().into_iter().for_each(Parameter::zero_grad);
        self.model
            .loss_and_grad(&refs(&self.seqs), &self.labels, None)
            .expect("objective batch is well formed")
    }

    fn loss(&mut self) -> f64 {
        self.model
            .loss(&refs(&self.seqs), &self.labels)
            .expect("objective batch is well formed")
    }
}

/// Reconstruction MSE of an autoencoder over encoder, decoder and projection.
pub struct ReconstructionObjective {
    pub model: LstmAutoencoder,
    pub seqs: Vec<EncodedSequence>,
}

impl Differentiable for ReconstructionObjective {
    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.reconstruction_mut()
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.model.reconstruction_mut().into_iter().for_each(Parameter::zero_grad);
        self.model
            .reconstruction_loss_and_grad(&refs(&self.seqs))
            .expect("objective batch is well formed")
    }

    fn loss(&mut self) -> f64 {
        self.model
            .reconstruction_loss(&refs(&self.seqs))
            .expect("objective batch is well formed")
    }
}

/// BCE of the autoencoder head with gradients flowing into the encoder.
pub struct AutoencoderHeadObjective {
    pub model: LstmAutoencoder,
    pub seqs: Vec<EncodedSequence>,
    pub labels: Vec<f64>,
}

impl Differentiable for AutoencoderHeadObjective {
    fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.classification_mut(true)
    }

    fn loss_and_grad(&mut self) -> f64 {
        self.model.classification_mut(true).into_iter().for_each(Parameter::zero_grad);
        self.model
            .classification_loss_and_grad(&refs(&self.seqs), &self.labels, true)
            .expect("objective batch is well formed")
    }

    fn loss(&mut self) -> f64 {
        self.model
            .classification_loss(&refs(&self.seqs), &self.labels)
            .expect("objective batch is well formed")
    }
}
