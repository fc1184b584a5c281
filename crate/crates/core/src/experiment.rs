//! The JSON run definition read by the CLI.
//!
//! ```json
//! {
//!   "seed": 1,
//!   "data": { "csv": "functions.csv", "ratios": { "train": 0.8, "validation": 0.1, "test": 0.1 } },
//!   "output_dir": "runs/demo",
//!   "tokenizer": { "max_sequence_length": 50 },
//!   "embedding": { "mode": "minimal", "glove": { "dim": 50 }, "fasttext": { "dim": 50 } },
//!   "models": { "lstm": { "hidden_size": 32, "epochs": 10 } },
//!   "ensemble": { "l2": 0.0001 }
//! }
//! ```
//!
//! `data` takes either `csv` (with optional `ratios`) or all three of
//! `train`, `validation` and `test`. Relative paths resolve against the
//! config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_csv, split_dataset, DatasetSplit, LabeledFunction, SplitRatios};
use crate::embeddings::{FastTextParams, GloveParams};
use crate::ensemble::MetaParams;
use crate::error::{Error, Result};
use crate::lexer::TokenizerConfig;
use crate::models::{Architecture, EmbeddingMode, ModelConfig, Word2vecSettings};
use crate::pipeline::{EmbeddingSettings, PipelineSettings, DEFAULT_MAX_VOCAB};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<SplitRatios>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
}

/// Where the labeled functions come from, after validation.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Single { csv: PathBuf, ratios: SplitRatios },
    Explicit { train: PathBuf, validation: PathBuf, test: PathBuf },
}

impl DataConfig {
    pub fn source(&self) -> Result<DataSource> {
        let explicit = [&self.train, &self.validation, &self.test];
        let n_explicit = explicit.iter().filter(|p| p.is_some()).count();
        match (&self.csv, n_explicit) {
            (Some(csv), 0) => {
                let ratios = self.ratios.unwrap_or_default();
                ratios
                    .validate()
                    .map_err(|e| Error::config("data.ratios", e.to_string()))?;
                Ok(DataSource::Single {
                    csv: csv.clone(),
                    ratios,
                })
            }
            (None, 3) => {
                if self.ratios.is_some() {
                    return Err(Error::config("data.ratios", "ratios only apply to a single csv"));
                }
                Ok(DataSource::Explicit {
                    train: self.train.clone().unwrap_or_default(),
                    validation: self.validation.clone().unwrap_or_default(),
                    test: self.test.clone().unwrap_or_default(),
                })
            }
            _ => Err(Error::config(
                "data",
                "set exactly one of `csv` (single file plus ratios) or all of `train`, `validation`, `test`",
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub mode: EmbeddingMode,
    pub glove: GloveParams,
    pub fasttext: FastTextParams,
    pub cooccurrence_window: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let e = EmbeddingSettings::default();
        EmbeddingConfig {
            mode: EmbeddingMode::default(),
            glove: e.glove,
            fasttext: e.fasttext,
            cooccurrence_window: e.cooccurrence_window,
        }
    }
}

/// Fields a config may change on top of an architecture's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub hidden_size: Option<usize>,
    pub num_layers: Option<usize>,
    pub dropout_rate: Option<f64>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub head_epochs: Option<usize>,
    pub head_learning_rate: Option<f64>,
    pub fine_tune_encoder: Option<bool>,
    pub word2vec: Option<Word2vecSettings>,
}

impl ModelOverrides {
    pub fn apply(&self, mut c: ModelConfig) -> ModelConfig {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut c.hidden_size, &self.hidden_size);
        set(&mut c.num_layers, &self.num_layers);
        set(&mut c.dropout_rate, &self.dropout_rate);
        set(&mut c.learning_rate, &self.learning_rate);
        set(&mut c.batch_size, &self.batch_size);
        set(&mut c.epochs, &self.epochs);
        set(&mut c.embedding_dim, &self.embedding_dim);
        set(&mut c.head_epochs, &self.head_epochs);
        set(&mut c.head_learning_rate, &self.head_learning_rate);
        set(&mut c.fine_tune_encoder, &self.fine_tune_encoder);
        set(&mut c.word2vec, &self.word2vec);
        c
    }
}

fn default_max_vocab() -> usize {
    DEFAULT_MAX_VOCAB
}

/// serde reports a missing field at its parent; point at the field itself.
fn missing_field_path(parent: &str, message: &str) -> String {
    let field = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next());
    match field {
        Some(f) if parent == "." => f.to_string(),
        Some(f) => format!("{parent}.{f}"),
        None => parent.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tokenizer: TokenizerConfig,
    #[serde(default = "default_max_vocab")]
    pub max_vocab: usize,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    /// Keyed by architecture name (`simple_rnn`, `lstm`, ...).
    pub models: BTreeMap<String, ModelOverrides>,
    #[serde(default)]
    pub ensemble: MetaParams,
    #[serde(default)]
    pub parallel_base_models: bool,
}

impl ExperimentConfig {
    /// A config over one CSV with default settings everywhere else.
    pub fn for_csv(csv: impl Into<PathBuf>, seed: u64) -> Self {
        ExperimentConfig {
            seed,
            data: DataConfig {
                csv: Some(csv.into()),
                ..DataConfig::default()
            },
            output_dir: None,
            tokenizer: TokenizerConfig::default(),
            max_vocab: DEFAULT_MAX_VOCAB,
            embedding: EmbeddingConfig::default(),
            models: BTreeMap::new(),
            ensemble: MetaParams::default(),
            parallel_base_models: false,
        }
    }

    /// Parses and validates; schema errors carry the JSON path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let parent = e.path().to_string();
            let message = e.into_inner().to_string();
            Error::config(missing_field_path(&parent, &message), message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves relative data and output paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p.as_mut() {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut cfg.data.csv);
        resolve(&mut cfg.data.train);
        resolve(&mut cfg.data.validation);
        resolve(&mut cfg.data.test);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.source()?;
        for key in self.models.keys() {
            key.parse::<Architecture>()
                .map_err(|e| Error::config(format!("models.{key}"), e.to_string()))?;
        }
        self.tokenizer
            .validate()
            .map_err(|e| Error::config("tokenizer.max_sequence_length", e.to_string()))?;
        if self.max_vocab == 0 {
            return Err(Error::config("max_vocab", "must be at least 1"));
        }
        if self.embedding.cooccurrence_window == 0 {
            return Err(Error::config("embedding.cooccurrence_window", "must be at least 1"));
        }
        for c in self.model_configs() {
            c.validate()
                .map_err(|e| Error::config(format!("models.{}", c.architecture.name()), e.to_string()))?;
        }
        Ok(())
    }

    /// Defaults for all five architectures with this config's overrides.
    pub fn model_configs(&self) -> Vec<ModelConfig> {
        Architecture::ALL
            .iter()
            .map(|&a| {
                let base = ModelConfig {
                    max_sequence_length: self.tokenizer.max_sequence_length,
                    embedding: self.embedding.mode,
                    seed: self.seed,
                    ..ModelConfig::defaults(a)
                };
                match self.models.get(a.name()) {
                    Some(o) => o.apply(base),
                    None => base,
                }
            })
            .collect()
    }

    pub fn settings(&self) -> Result<PipelineSettings> {
        let ratios = match self.data.source()? {
            DataSource::Single { ratios, .. } => ratios,
            DataSource::Explicit { .. } => SplitRatios::default(),
        };
        Ok(PipelineSettings {
            tokenizer: self.tokenizer.clone(),
            max_vocab: self.max_vocab,
            ratios,
            embedding_mode: self.embedding.mode,
            embeddings: EmbeddingSettings {
                glove: self.embedding.glove.clone(),
                fasttext: self.embedding.fasttext.clone(),
                cooccurrence_window: self.embedding.cooccurrence_window,
            },
            models: self.model_configs(),
            meta: self.ensemble.clone(),
            parallel_base_models: self.parallel_base_models,
        })
    }

    /// Every labeled function named by `data`, unsplit.
    pub fn load_all(&self) -> Result<Vec<LabeledFunction>> {
        match self.data.source()? {
            DataSource::Single { csv, .. } => load_csv(&csv),
            DataSource::Explicit { train, validation, test } => {
                let mut all = load_csv(&train)?;
                all.extend(load_csv(&validation)?);
                all.extend(load_csv(&test)?);
                Ok(all)
            }
        }
    }

    /// The train/validation/test split: seeded for a single CSV, as given
    /// otherwise.
    pub fn load_split(&self) -> Result<DatasetSplit> {
        match self.data.source()? {
            DataSource::Single { csv, ratios } => split_dataset(&load_csv(&csv)?, ratios, self.seed),
            DataSource::Explicit { train, validation, test } => Ok(DatasetSplit {
                train: load_csv(&train)?,
                validation: load_csv(&validation)?,
                test: load_csv(&test)?,
                seed: self.seed,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_path(text: &str) -> String {
        match ExperimentConfig::from_json(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 3, "data": {"csv": "a.csv"}}"#).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.settings().unwrap().models.len(), 5);
    }

    #[test]
    fn seed_is_mandatory() {
        assert_eq!(config_path(r#"{"data": {"csv": "a.csv"}}"#), "seed");
    }

    #[test]
    fn data_needs_exactly_one_form() {
        assert_eq!(config_path(r#"{"seed": 1, "data": {}}"#), "data");
        assert_eq!(
            config_path(r#"{"seed": 1, "data": {"csv": "a", "train": "b", "validation": "c", "test": "d"}}"#),
            "data"
        );
        assert_eq!(config_path(r#"{"seed": 1, "data": {"train": "b", "validation": "c"}}"#), "data");
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "data": {"train": "b", "validation": "c", "test": "d"}}"#).is_ok());
    }

    #[test]
    fn schema_errors_name_the_path() {
        assert_eq!(
            config_path(r#"{"seed": 1, "data": {"csv": "a"}, "models": {"lstm": {"hidden_size": "big"}}}"#),
            "models.lstm.hidden_size"
        );
        assert_eq!(
            config_path(r#"{"seed": 1, "data": {"csv": "a"}, "models": {"lstm": {"dropout_rate": 1.5}}}"#),
            "models.lstm"
        );
        assert_eq!(
            config_path(r#"{"seed": 1, "data": {"csv": "a", "ratios": {"train": 0.9, "validation": 0.2, "test": 0.1}}}"#),
            "data.ratios"
        );
    }

    #[test]
    fn unknown_model_name_is_rejected() {
        assert_eq!(
            config_path(r#"{"seed": 1, "data": {"csv": "a"}, "models": {"gru": {}}}"#),
            "models.gru"
        );
    }

    #[test]
    fn overrides_apply_on_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seed": 1, "data": {"csv": "a"}, "tokenizer": {"max_sequence_length": 50},
                "models": {"bilstm": {"hidden_size": 32, "epochs": 4}}}"#,
        )
        .unwrap();
        let bilstm = cfg.model_configs().into_iter().find(|c| c.architecture == Architecture::Bilstm).unwrap();
        assert_eq!((bilstm.hidden_size, bilstm.epochs, bilstm.num_layers), (32, 4, 3));
        assert_eq!(bilstm.max_sequence_length, 50);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::for_csv("x.csv", 9);
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
