//! The five Level-0 classifiers: Simple RNN, stacked LSTM, stacked BiLSTM,
//! LSTM autoencoder with a logistic head, and a mean-pooled word2vec
//! classifier.

mod autoencoder;
pub mod checkpoint;
mod classifier;
pub mod objectives;
pub mod layers;
mod pooled;
pub mod recurrent;
mod train;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use autoencoder::LstmAutoencoder;
pub use checkpoint::{load_checkpoint, load_manifest, save_checkpoint, Manifest, MANIFEST_FILE, WEIGHTS_FILE};
pub use classifier::SequenceClassifier;
pub use layers::{Embedding, Mask, Seq};
pub use pooled::EmbeddingClassifier;
pub use recurrent::{lstm_cell_forward, CellKind, LstmLayer, RecurrentStack, RnnLayer};
pub use train::{
    autoencoder_classify, fit, fit_autoencoder_head, predict_proba, train_autoencoder, train_classifier,
    sgns_params, word2vec_classify, Examples,
};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexer::PAD_ID;
use crate::nn::{glorot_bound, Parameter, Tensor};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SimpleRnn,
    Lstm,
    Bilstm,
    LstmAutoencoder,
    Word2vecClf,
}

impl Architecture {
    /// Level-0 order used by the ensemble.
    pub const ALL: [Architecture; 5] = [
        Architecture::SimpleRnn,
        Architecture::Lstm,
        Architecture::Bilstm,
        Architecture::LstmAutoencoder,
        Architecture::Word2vecClf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::SimpleRnn => "simple_rnn",
            Architecture::Lstm => "lstm",
            Architecture::Bilstm => "bilstm",
            Architecture::LstmAutoencoder => "lstm_autoencoder",
            Architecture::Word2vecClf => "word2vec_clf",
        }
    }

    /// Row label used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Architecture::SimpleRnn => "Simple RNN",
            Architecture::Lstm => "LSTM",
            Architecture::Bilstm => "BiLSTM",
            Architecture::LstmAutoencoder => "LSTMAutoencoder",
            Architecture::Word2vecClf => "Word2vec",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Architecture::ALL.iter().map(|a| a.name()).collect();
                Error::value(format!("unknown model {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    #[default]
    #[serde(alias = "minimal")]
    TrainableMinimal,
    #[serde(alias = "stacked")]
    StackedGloveFasttext,
}

impl EmbeddingMode {
    pub fn tag(self) -> &'static str {
        match self {
            EmbeddingMode::TrainableMinimal => "minimal",
            EmbeddingMode::StackedGloveFasttext => "glove+fasttext",
        }
    }

    /// Short filesystem-safe name.
    pub fn slug(self) -> &'static str {
        match self {
            EmbeddingMode::TrainableMinimal => "minimal",
            EmbeddingMode::StackedGloveFasttext => "stacked",
        }
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimal" | "trainable_minimal" => Ok(EmbeddingMode::TrainableMinimal),
            "stacked" | "stacked_glove_fasttext" | "glove+fasttext" => Ok(EmbeddingMode::StackedGloveFasttext),
            _ => Err(Error::value(format!("unknown embedding mode {s:?}; expected minimal or stacked"))),
        }
    }
}

/// Skip-gram settings used only by `word2vec_clf`; the rest of its SGNS
/// schedule comes from `learning_rate`, `batch_size`, `epochs` and
/// `embedding_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Word2vecSettings {
    pub lr_end: f64,
    pub window: usize,
    pub negatives: usize,
}

impl Default for Word2vecSettings {
    fn default() -> Self {
        Word2vecSettings {
            lr_end: 0.001,
            window: 5,
            negatives: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub embedding: EmbeddingMode,
    /// Width of the trainable embedding. Ignored when a pretrained matrix is
    /// supplied; its width wins.
    pub embedding_dim: usize,
    pub max_sequence_length: usize,
    pub seed: u64,
    /// Epochs for the logistic heads of `lstm_autoencoder` and `word2vec_clf`.
    pub head_epochs: usize,
    pub head_learning_rate: f64,
    /// Let the autoencoder's classification loss update its encoder.
    pub fine_tune_encoder: bool,
    pub word2vec: Word2vecSettings,
}

impl ModelConfig {
    pub fn defaults(architecture: Architecture) -> Self {
        let base = ModelConfig {
            architecture,
            hidden_size: 128,
            num_layers: 1,
            dropout_rate: 0.0,
            learning_rate: 0.001,
            batch_size: 32,
            epochs: 50,
            embedding: EmbeddingMode::TrainableMinimal,
            embedding_dim: 100,
            max_sequence_length: 500,
            seed: 0,
            head_epochs: 50,
            head_learning_rate: 0.01,
            fine_tune_encoder: true,
            word2vec: Word2vecSettings::default(),
        };
        match architecture {
            Architecture::SimpleRnn => ModelConfig {
                hidden_size: 256,
                ..base
            },
            Architecture::Lstm | Architecture::Bilstm => ModelConfig {
                num_layers: 3,
                dropout_rate: 0.2,
                ..base
            },
            Architecture::LstmAutoencoder => base,
            Architecture::Word2vecClf => ModelConfig {
                hidden_size: 0,
                learning_rate: 0.025,
                batch_size: 128,
                epochs: 5,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::value(format!("{}: {m}", self.architecture)));
        let recurrent = self.architecture != Architecture::Word2vecClf;
        if recurrent && (self.hidden_size == 0 || self.num_layers == 0) {
            return bad("hidden_size and num_layers must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.head_learning_rate > 0.0 && self.head_learning_rate.is_finite()) {
            return bad(format!("head_learning_rate {} must be positive", self.head_learning_rate));
        }
        if self.batch_size == 0 || self.embedding_dim == 0 || self.max_sequence_length == 0 {
            return bad("batch_size, embedding_dim and max_sequence_length must be positive".into());
        }
        if self.architecture == Architecture::Word2vecClf && !(self.word2vec.lr_end > 0.0 && self.word2vec.lr_end <= self.learning_rate) {
            return bad(format!(
                "word2vec lr_end {} must be in (0, learning_rate]",
                self.word2vec.lr_end
            ));
        }
        Ok(())
    }
}

/// Per-instance probabilities of the vulnerable class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionVector {
    pub probs: Vec<f64>,
}

impl PredictionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::value(format!("probability {p} at {i} outside [0, 1]")));
        }
        Ok(PredictionVector { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Classification,
    Reconstruction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Sequence(SequenceClassifier),
    Autoencoder(LstmAutoencoder),
    Pooled(EmbeddingClassifier),
}

impl Network {
    pub fn parameters(&self) -> Vec<(String, &Parameter)> {
        match self {
            Network::Sequence(m) => m.parameters(),
            Network::Autoencoder(m) => m.parameters(),
            Network::Pooled(m) => m.parameters(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Network::Sequence(m) => m.parameters_mut(),
            Network::Autoencoder(m) => m.parameters_mut(),
            Network::Pooled(m) => m.parameters_mut(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, p)| p.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub vocab_size: usize,
    pub network: Network,
    pub history: Vec<EpochRecord>,
    pub wall_time: Duration,
    pub trained: bool,
}

impl TrainedModel {
    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn parameter_count(&self) -> usize {
        self.network.parameter_count()
    }
}

/// Randomly initialised trainable table; the padding row is zero.
fn random_table(rows: usize, dim: usize, rng: &mut rng::Rng) -> Tensor {
    let mut t = Tensor::uniform(&[rows, dim], glorot_bound(rows, dim), rng);
    t.row_mut(PAD_ID as usize).fill(0.0);
    t
}

/// Builds the untrained network for `config` over `vocab_size` tokens
/// (`vocab_size + 2` embedding rows).
///
/// `pretrained` is required for the stacked embedding mode and for
/// `word2vec_clf` (its skip-gram vectors); it is rejected for the minimal
/// mode of the recurrent models.
pub fn build_model(config: &ModelConfig, vocab_size: usize, pretrained: Option<&EmbeddingMatrix>) -> Result<TrainedModel> {
    config.validate()?;
    let rows = vocab_size + 2;
    let arch = config.architecture;
    let config_err = |message: String| Error::Config {
        path: format!("models.{arch}.embedding"),
        message,
    };
    if let Some(m) = pretrained {
        if m.rows() != rows {
            return Err(Error::shape(format!(
                "pretrained matrix has {} rows, vocabulary needs {rows}",
                m.rows()
            )));
        }
    }
    let table = match (arch, config.embedding, pretrained) {
        (Architecture::Word2vecClf, _, Some(m)) => (m.tensor().clone(), false),
        (Architecture::Word2vecClf, _, None) => {
            return Err(config_err("word2vec_clf needs its skip-gram embedding matrix".into()))
        }
        (_, EmbeddingMode::StackedGloveFasttext, Some(m)) => (m.tensor().clone(), false),
        (_, EmbeddingMode::StackedGloveFasttext, None) => {
            return Err(config_err("stacked mode requires the GloVe+fastText matrix".into()))
        }
        (_, EmbeddingMode::TrainableMinimal, Some(_)) => {
            return Err(config_err("minimal mode trains its own embedding; drop the pretrained matrix".into()))
        }
        (_, EmbeddingMode::TrainableMinimal, None) => {
            let mut r = rng::seeded(rng::derive_seed(config.seed, "embedding-init"));
            (random_table(rows, config.embedding_dim, &mut r), true)
        }
    };
    Ok(assemble(config, vocab_size, table.0, table.1))
}

/// Wires a network around a given embedding table.
pub(crate) fn assemble(config: &ModelConfig, vocab_size: usize, table: Tensor, trainable: bool) -> TrainedModel {
    let mut r = rng::seeded(rng::derive_seed(config.seed, "weights-init"));
    let h = config.hidden_size;
    let network = match config.architecture {
        Architecture::SimpleRnn | Architecture::Lstm | Architecture::Bilstm => {
            let cell = if config.architecture == Architecture::SimpleRnn {
                CellKind::Rnn
            } else {
                CellKind::Lstm
            };
            Network::Sequence(SequenceClassifier::new(
                Embedding::new(table, trainable),
                cell,
                h,
                config.num_layers,
                config.architecture == Architecture::Bilstm,
                config.dropout_rate,
                &mut r,
            ))
        }
        Architecture::LstmAutoencoder => Network::Autoencoder(LstmAutoencoder::new(Embedding::new(table, trainable), h, h, &mut r)),
        Architecture::Word2vecClf => Network::Pooled(EmbeddingClassifier::new(table, &mut r)),
    };
    TrainedModel {
        config: config.clone(),
        vocab_size,
        network,
        history: Vec::new(),
        wall_time: Duration::ZERO,
        trained: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_rnn_parameter_count() {
        let cfg = ModelConfig::defaults(Architecture::SimpleRnn);
        let vocab = 1000;
        let m = build_model(&cfg, vocab, None).unwrap();
        let (rows, e, h) = (vocab + 2, 100, 256);
        assert_eq!(m.parameter_count(), rows * e + (e + h) * h + h + h + 1);
    }

    #[test]
    fn bilstm_readout_is_twice_hidden() {
        let cfg = ModelConfig {
            hidden_size: 16,
            embedding_dim: 8,
            ..ModelConfig::defaults(Architecture::Bilstm)
        };
        let m = build_model(&cfg, 10, None).unwrap();
        let Network::Sequence(s) = &m.network else { panic!() };
        assert_eq!(s.head.fan_in(), 32);
    }

    #[test]
    fn stacked_mode_without_matrix_is_config_error() {
        let cfg = ModelConfig {
            embedding: EmbeddingMode::StackedGloveFasttext,
            ..ModelConfig::defaults(Architecture::Lstm)
        };
        assert!(matches!(build_model(&cfg, 10, None), Err(Error::Config { .. })));
    }

    #[test]
    fn architecture_names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
    }

    #[test]
    fn architecture_defaults() {
        let l = ModelConfig::defaults(Architecture::Lstm);
        assert_eq!((l.num_layers, l.hidden_size, l.dropout_rate), (3, 128, 0.2));
        let w = ModelConfig::defaults(Architecture::Word2vecClf);
        assert_eq!((w.learning_rate, w.word2vec.lr_end, w.batch_size, w.epochs), (0.025, 0.001, 128, 5));
    }
}
