//! Function-level buffer-overflow detection for C/C++ source.
//!
//! The crate covers the whole pipeline: CSV ingestion and splitting
//! ([`corpus`]), space tokenization and integer encoding ([`lexer`]),
//! GloVe / fastText / word2vec embeddings trained from scratch
//! ([`embeddings`]), a small dense-tensor substrate with manual
//! backpropagation ([`nn`]), five recurrent and embedding classifiers
//! ([`models`]), the logistic stacking ensemble over them ([`ensemble`]),
//! and evaluation ([`metrics`]). [`pipeline`], [`experiment`] and
//! [`stages`] glue those into the on-disk experiment runner used by the CLI.

pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod lexer;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod stages;
pub mod synth;

pub use corpus::{CorpusStats, DatasetSplit, Label, LabeledFunction, SplitRatios};
pub use embeddings::EmbeddingMatrix;
pub use ensemble::{EnsembleModel, MetaLearner, StackInput};
pub use error::{Error, Result};
pub use lexer::{EncodedSequence, TokenSequence, TokenizerConfig, Vocabulary};
pub use metrics::{ConfusionCounts, MetricsReport};
pub use models::{Architecture, EmbeddingMode, ModelConfig, PredictionVector, TrainedModel};
pub use nn::{Parameter, Tensor};
