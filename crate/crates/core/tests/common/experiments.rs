//! Desk-scale run settings shared by the acceptance and stage tests.

use stackguard_core::pipeline::PipelineSettings;
use stackguard_core::{Architecture, EmbeddingMode};

/// Hidden 32, at most 15 epochs everywhere, sequences cut at 50 tokens.
pub fn reduced_settings(mode: EmbeddingMode) -> PipelineSettings {
    let mut s = PipelineSettings::default();
    s.tokenizer.max_sequence_length = 50;
    s.embedding_mode = mode;
    for m in s.models.iter_mut() {
        m.head_epochs = 15;
        match m.architecture {
            Architecture::Word2vecClf => m.head_learning_rate = 0.03,
            _ => {
                m.hidden_size = 32;
                m.epochs = 10;
            }
        }
    }
    s
}

/// Same models with the logistic heads left at their default schedule.
pub fn reduced_settings_default_heads(mode: EmbeddingMode) -> PipelineSettings {
    let mut s = reduced_settings(mode);
    let defaults = PipelineSettings::default();
    for (m, d) in s.models.iter_mut().zip(&defaults.models) {
        m.head_epochs = d.head_epochs;
        m.head_learning_rate = d.head_learning_rate;
    }
    s
}

/// Seconds-scale settings for pipeline plumbing tests.
pub fn tiny_settings(mode: EmbeddingMode) -> PipelineSettings {
    let mut s = PipelineSettings::default();
    s.tokenizer.max_sequence_length = 30;
    s.embedding_mode = mode;
    s.embeddings.glove.dim = 8;
    s.embeddings.glove.epochs = 3;
    s.embeddings.fasttext.dim = 8;
    s.embeddings.fasttext.epochs = 1;
    s.embeddings.fasttext.bucket_count = 4096;
    for m in s.models.iter_mut() {
        m.hidden_size = 8;
        m.num_layers = 1;
        m.embedding_dim = 8;
        m.epochs = 2;
        m.head_epochs = 3;
        m.batch_size = 32;
    }
    s
}

/// Fraction of thresholded probabilities equal to the labels.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> f64 {
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| u8::from(**p >= 0.5) == **y)
        .count();
    hits as f64 / labels.len() as f64
}
