//! In-memory composition of the stages: split, tokenize and encode, train
//! embeddings, fit the base models, stack.

use serde::{Deserialize, Serialize};

use crate::corpus::{labels_of, split_dataset, DatasetSplit, LabeledFunction, SplitRatios};
use crate::embeddings::{
    build_cooccurrence, stack_embeddings, train_fasttext, train_glove, EmbeddingMatrix, FastTextModel, FastTextParams,
    GloveParams,
};
use crate::ensemble::{stack_trained, MetaParams, StackingOutcome};
use crate::error::{Error, Result};
use crate::lexer::{build_vocabulary, encode, tokenize, EncodedSequence, TokenSequence, TokenizerConfig, Vocabulary, FIRST_TOKEN_ID};
use crate::models::{fit, Architecture, EmbeddingMode, Examples, ModelConfig, TrainedModel};
use crate::rng;

pub const DEFAULT_MAX_VOCAB: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub glove: GloveParams,
    pub fasttext: FastTextParams,
    pub cooccurrence_window: usize,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            glove: GloveParams::default(),
            fasttext: FastTextParams::default(),
            cooccurrence_window: 5,
        }
    }
}

/// Everything a run needs besides the data and the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSettings {
    pub tokenizer: TokenizerConfig,
    pub max_vocab: usize,
    pub ratios: SplitRatios,
    pub embedding_mode: EmbeddingMode,
    pub embeddings: EmbeddingSettings,
    /// One config per base model, in Level-0 order.
    pub models: Vec<ModelConfig>,
    pub meta: MetaParams,
    pub parallel_base_models: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            tokenizer: TokenizerConfig::default(),
            max_vocab: DEFAULT_MAX_VOCAB,
            ratios: SplitRatios::default(),
            embedding_mode: EmbeddingMode::TrainableMinimal,
            embeddings: EmbeddingSettings::default(),
            models: Architecture::ALL.iter().map(|&a| ModelConfig::defaults(a)).collect(),
            meta: MetaParams::default(),
            parallel_base_models: false,
        }
    }
}

impl PipelineSettings {
    /// The config actually trained: per-model seed derived from the run
    /// seed, embedding mode and sequence length taken from the run.
    pub fn resolved(&self, arch: Architecture, seed: u64) -> Result<ModelConfig> {
        let base = self
            .models
            .iter()
            .find(|m| m.architecture == arch)
            .ok_or_else(|| Error::value(format!("no configuration for {arch}")))?;
        Ok(ModelConfig {
            seed: rng::derive_seed(seed, arch.name()),
            embedding: self.embedding_mode,
            max_sequence_length: self.tokenizer.max_sequence_length,
            ..base.clone()
        })
    }

    pub fn architectures(&self) -> Vec<Architecture> {
        self.models.iter().map(|m| m.architecture).collect()
    }
}

/// Vocabulary plus encoded, labeled splits.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub train: Examples,
    pub validation: Examples,
    pub test: Examples,
}

fn encode_all(data: &[LabeledFunction], tokenizer: &TokenizerConfig, vocab: &Vocabulary) -> Result<Examples> {
    let seqs = data
        .iter()
        .map(|f| encode(&tokenize(&f.source, tokenizer), vocab, tokenizer.max_sequence_length))
        .collect();
    Examples::new(seqs, labels_of(data))
}

/// Vocabulary from the training split only; every split encoded with it.
pub fn prepare_split(split: &DatasetSplit, tokenizer: &TokenizerConfig, max_vocab: usize) -> Result<PreparedData> {
    tokenizer.validate()?;
    let tokens: Vec<TokenSequence> = split.train.iter().map(|f| tokenize(&f.source, tokenizer)).collect();
    let vocab = build_vocabulary(&tokens, max_vocab)?;
    Ok(PreparedData {
        train: encode_all(&split.train, tokenizer, &vocab)?,
        validation: encode_all(&split.validation, tokenizer, &vocab)?,
        test: encode_all(&split.test, tokenizer, &vocab)?,
        vocab,
    })
}

/// In-vocabulary tokens of an encoded sequence (padding and OOV dropped).
pub fn decode_tokens(seq: &EncodedSequence, vocab: &Vocabulary) -> TokenSequence {
    seq.ids
        .iter()
        .filter(|&&id| id >= FIRST_TOKEN_ID)
        .filter_map(|&id| vocab.token(id))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedEmbeddings {
    pub glove: EmbeddingMatrix,
    pub fasttext: FastTextModel,
    pub fasttext_composed: EmbeddingMatrix,
    pub stacked: EmbeddingMatrix,
}

/// GloVe and fastText on the encoded training split, and their stack.
pub fn train_embeddings(prepared: &PreparedData, settings: &EmbeddingSettings, seed: u64) -> Result<PretrainedEmbeddings> {
    let rows = prepared.vocab.rows();
    let cooc = build_cooccurrence(&prepared.train.seqs, settings.cooccurrence_window)?;
    let glove_params = GloveParams {
        seed: rng::derive_seed(seed, "glove"),
        ..settings.glove.clone()
    };
    let glove = train_glove(&cooc, rows, &glove_params)?.embeddings;
    let corpus: Vec<TokenSequence> = prepared
        .train
        .seqs
        .iter()
        .map(|s| decode_tokens(s, &prepared.vocab))
        .collect();
    let ft_params = FastTextParams {
        seed: rng::derive_seed(seed, "fasttext"),
        ..settings.fasttext.clone()
    };
    let fasttext = train_fasttext(&corpus, &prepared.vocab, &ft_params)?;
    let fasttext_composed = fasttext.composed_matrix()?;
    let stacked = stack_embeddings(&glove, &fasttext_composed)?;
    Ok(PretrainedEmbeddings {
        glove,
        fasttext,
        fasttext_composed,
        stacked,
    })
}

/// Fits every config; with `parallel` each model trains on its own thread.
pub fn train_base_models(
    prepared: &PreparedData,
    configs: &[ModelConfig],
    pretrained: Option<&EmbeddingMatrix>,
    parallel: bool,
) -> Result<Vec<TrainedModel>> {
    let vocab_size = prepared.vocab.size();
    let one = |cfg: &ModelConfig| fit(cfg, vocab_size, &prepared.train, &prepared.validation, pretrained);
    if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(move || one(cfg))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("base model thread panicked"))
                .collect()
        })
    } else {
        configs.iter().map(one).collect()
    }
}

/// Stacking needs exactly one config for each of the five base models.
pub fn check_all_models(settings: &PipelineSettings) -> Result<()> {
    let mut archs = settings.architectures();
    archs.sort();
    archs.dedup();
    if archs != Architecture::ALL || settings.models.len() != Architecture::ALL.len() {
        return Err(Error::value("stacking needs exactly one config for each of the five base models"));
    }
    Ok(())
}

/// The whole two-level procedure on raw labeled functions.
pub fn run_stacking(data: &[LabeledFunction], settings: &PipelineSettings, seed: u64) -> Result<StackingOutcome> {
    let split = split_dataset(data, settings.ratios, seed)?;
    run_stacking_on_split(split, settings, seed)
}

/// As [`run_stacking`], for data that arrives already split.
pub fn run_stacking_on_split(split: DatasetSplit, settings: &PipelineSettings, seed: u64) -> Result<StackingOutcome> {
    check_all_models(settings)?;
    let prepared = prepare_split(&split, &settings.tokenizer, settings.max_vocab)?;
    let pretrained = match settings.embedding_mode {
        EmbeddingMode::StackedGloveFasttext => Some(train_embeddings(&prepared, &settings.embeddings, seed)?.stacked),
        EmbeddingMode::TrainableMinimal => None,
    };
    let configs = Architecture::ALL
        .iter()
        .map(|&a| settings.resolved(a, seed))
        .collect::<Result<Vec<_>>>()?;
    let models = train_base_models(&prepared, &configs, pretrained.as_ref(), settings.parallel_base_models)?;
    let (ensemble, level0_test, test_predictions) = stack_trained(
        models,
        &prepared.validation.seqs,
        &prepared.validation.labels,
        &prepared.test.seqs,
        &settings.meta,
    )?;
    Ok(StackingOutcome {
        test_labels: prepared.test.labels.clone(),
        split,
        ensemble,
        level0_test,
        test_predictions,
    })
}
