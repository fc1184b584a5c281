//! The experiment as resumable on-disk stages under one output directory:
//!
//! ```text
//! <out>/vocab/vocab.txt
//! <out>/encoded/{train,validation,test}.{csv,tsv}, prepare.json
//! <out>/embeddings/{glove,fasttext,word2vec,stacked}.txt
//! <out>/checkpoints/<arm>/<model>/{manifest.json,weights.bin}
//! <out>/reports/<arm>/..., reports/report.md, reports/corpus_stats.csv
//! ```
//!
//! `<arm>` is `minimal` or `stacked`. A stage whose inputs are absent fails
//! with [`Error::MissingPrerequisite`] naming the stage to run first.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{corpus_stats, write_csv, DatasetSplit, LabeledFunction};
use crate::embeddings::{train_word2vec_sgns, EmbeddingMatrix};
use crate::ensemble::{stack_trained, StackInput};
use crate::error::{Error, Result};
use crate::lexer::{EncodedSequence, TokenizerConfig, Vocabulary};
use crate::metrics::{timed, MetricsReport};
use crate::models::{
    load_checkpoint, predict_proba, save_checkpoint, sgns_params, Architecture, EmbeddingMode, Examples, ModelConfig,
    PredictionVector, TrainedModel, MANIFEST_FILE,
};
use crate::pipeline::{check_all_models, prepare_split, train_base_models, train_embeddings, PipelineSettings, PreparedData};
use crate::report::{render_reports, RunReport};

pub const SPLITS: [&str; 3] = ["train", "validation", "test"];
const STACKED_FILE: &str = "stacked";

/// Paths inside an output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn vocab_file(&self) -> PathBuf {
        self.root.join("vocab").join("vocab.txt")
    }

    pub fn encoded_dir(&self) -> PathBuf {
        self.root.join("encoded")
    }

    pub fn prepare_manifest(&self) -> PathBuf {
        self.encoded_dir().join("prepare.json")
    }

    pub fn split_csv(&self, split: &str) -> PathBuf {
        self.encoded_dir().join(format!("{split}.csv"))
    }

    pub fn encoded_file(&self, split: &str) -> PathBuf {
        self.encoded_dir().join(format!("{split}.tsv"))
    }

    pub fn embedding_file(&self, name: &str) -> PathBuf {
        self.root.join("embeddings").join(format!("{name}.txt"))
    }

    pub fn checkpoint_dir(&self, mode: EmbeddingMode, arch: Architecture) -> PathBuf {
        self.root.join("checkpoints").join(mode.slug()).join(arch.name())
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn arm_dir(&self, mode: EmbeddingMode) -> PathBuf {
        self.reports_dir().join(mode.slug())
    }

    pub fn metrics_file(&self, mode: EmbeddingMode, name: &str) -> PathBuf {
        self.arm_dir(mode).join(format!("{name}.metrics.json"))
    }

    pub fn predictions_file(&self, mode: EmbeddingMode) -> PathBuf {
        self.arm_dir(mode).join("predictions.json")
    }

    pub fn run_report_file(&self, mode: EmbeddingMode) -> PathBuf {
        self.arm_dir(mode).join("run.json")
    }

    pub fn report_markdown(&self) -> PathBuf {
        self.reports_dir().join("report.md")
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) => ensure_dir(p),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_text(path, &(json + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::missing(stage, format!("{} not found", path.display())))
    }
}

/// Token frequencies of the whole corpus to `reports/corpus_stats.csv`.
pub fn run_stats(data: &[LabeledFunction], tokenizer: &TokenizerConfig, layout: &Layout) -> Result<PathBuf> {
    let path = layout.reports_dir().join("corpus_stats.csv");
    ensure_parent(&path)?;
    corpus_stats(data, tokenizer).write_csv(&path)?;
    Ok(path)
}

/// What `prepare` was run with; later stages read the tokenizer from here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepareManifest {
    pub seed: u64,
    pub tokenizer: TokenizerConfig,
    pub max_vocab: usize,
    pub vocab_size: usize,
    pub sizes: [usize; 3],
}

fn encoded_text(ex: &Examples) -> String {
    ex.seqs
        .iter()
        .zip(&ex.labels)
        .map(|(s, l)| format!("{l}\t{}\n", s.to_line()))
        .collect()
}

fn parse_encoded(path: &Path) -> Result<Examples> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = || Error::Format(format!("{}:{}: expected `label<TAB>ids`", path.display(), i + 1));
        let (label, ids) = line.split_once('\t').ok_or_else(bad)?;
        labels.push(label.parse::<u8>().map_err(|_| bad())?);
        seqs.push(EncodedSequence::from_line(ids)?);
    }
    Examples::new(seqs, labels)
}

/// Builds the vocabulary from the training split and writes it, the raw
/// splits and their encodings.
pub fn run_prepare(split: &DatasetSplit, settings: &PipelineSettings, layout: &Layout) -> Result<PreparedData> {
    let prepared = prepare_split(split, &settings.tokenizer, settings.max_vocab)?;
    ensure_parent(&layout.vocab_file())?;
    prepared.vocab.save(&layout.vocab_file())?;
    ensure_dir(&layout.encoded_dir())?;
    let parts = [
        (&split.train, &prepared.train),
        (&split.validation, &prepared.validation),
        (&split.test, &prepared.test),
    ];
    for (name, (raw, enc)) in SPLITS.iter().zip(parts) {
        write_csv(&layout.split_csv(name), raw)?;
        write_text(&layout.encoded_file(name), &encoded_text(enc))?;
    }
    let manifest = PrepareManifest {
        seed: split.seed,
        tokenizer: settings.tokenizer.clone(),
        max_vocab: settings.max_vocab,
        vocab_size: prepared.vocab.size(),
        sizes: [prepared.train.len(), prepared.validation.len(), prepared.test.len()],
    };
    write_json(&layout.prepare_manifest(), &manifest)?;
    Ok(prepared)
}

/// Reads back the outputs of `prepare`.
pub fn load_prepared(layout: &Layout) -> Result<(PreparedData, PrepareManifest)> {
    require(&layout.prepare_manifest(), "prepare")?;
    require(&layout.vocab_file(), "prepare")?;
    let manifest: PrepareManifest = read_json(&layout.prepare_manifest())?;
    let vocab = Vocabulary::load(&layout.vocab_file())?;
    let mut parts = Vec::new();
    for name in SPLITS {
        let path = layout.encoded_file(name);
        require(&path, "prepare")?;
        parts.push(parse_encoded(&path)?);
    }
    let test = parts.pop().expect("three splits");
    let validation = parts.pop().expect("three splits");
    let train = parts.pop().expect("three splits");
    Ok((
        PreparedData {
            vocab,
            train,
            validation,
            test,
        },
        manifest,
    ))
}

/// Settings with the tokenizer `prepare` actually used.
fn settings_for(settings: &PipelineSettings, manifest: &PrepareManifest) -> PipelineSettings {
    PipelineSettings {
        tokenizer: manifest.tokenizer.clone(),
        ..settings.clone()
    }
}

/// Paths of the matrices written by [`run_embed`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedOutputs {
    pub glove: PathBuf,
    pub fasttext: PathBuf,
    pub word2vec: PathBuf,
    pub stacked: PathBuf,
}

/// Trains GloVe, fastText and the skip-gram vectors `word2vec_clf` uses on
/// the encoded training split, and exports them with the stacked matrix.
pub fn run_embed(layout: &Layout, settings: &PipelineSettings, seed: u64) -> Result<EmbedOutputs> {
    let (prepared, manifest) = load_prepared(layout)?;
    let settings = settings_for(settings, &manifest);
    let pre = train_embeddings(&prepared, &settings.embeddings, seed)?;
    let w2v_config = settings.resolved(Architecture::Word2vecClf, seed)?;
    let w2v = train_word2vec_sgns(&prepared.train.seqs, prepared.vocab.rows(), &sgns_params(&w2v_config))?;
    let out = EmbedOutputs {
        glove: layout.embedding_file("glove"),
        fasttext: layout.embedding_file("fasttext"),
        word2vec: layout.embedding_file("word2vec"),
        stacked: layout.embedding_file(STACKED_FILE),
    };
    ensure_parent(&out.glove)?;
    pre.glove.save(&out.glove, &prepared.vocab)?;
    pre.fasttext_composed.save(&out.fasttext, &prepared.vocab)?;
    w2v.save(&out.word2vec, &prepared.vocab)?;
    pre.stacked.save(&out.stacked, &prepared.vocab)?;
    Ok(out)
}

fn pretrained_for(layout: &Layout, mode: EmbeddingMode, vocab: &Vocabulary) -> Result<Option<EmbeddingMatrix>> {
    match mode {
        EmbeddingMode::TrainableMinimal => Ok(None),
        EmbeddingMode::StackedGloveFasttext => {
            let path = layout.embedding_file(STACKED_FILE);
            require(&path, "embed")?;
            Ok(Some(EmbeddingMatrix::load(&path, vocab)?))
        }
    }
}

/// Fits the named base models and checkpoints each under the current arm.
pub fn run_train(layout: &Layout, settings: &PipelineSettings, archs: &[Architecture], seed: u64) -> Result<Vec<TrainedModel>> {
    let (prepared, manifest) = load_prepared(layout)?;
    let settings = settings_for(settings, &manifest);
    let pretrained = pretrained_for(layout, settings.embedding_mode, &prepared.vocab)?;
    let configs: Vec<ModelConfig> = archs
        .iter()
        .map(|&a| settings.resolved(a, seed))
        .collect::<Result<_>>()?;
    let models = train_base_models(&prepared, &configs, pretrained.as_ref(), settings.parallel_base_models)?;
    for m in &models {
        save_checkpoint(m, &layout.checkpoint_dir(settings.embedding_mode, m.config.architecture))?;
    }
    Ok(models)
}

fn load_trained(layout: &Layout, mode: EmbeddingMode, arch: Architecture) -> Result<TrainedModel> {
    let dir = layout.checkpoint_dir(mode, arch);
    if !dir.join(MANIFEST_FILE).exists() {
        return Err(Error::missing(
            "train",
            format!("no {} checkpoint for {arch} at {}", mode.tag(), dir.display()),
        ));
    }
    load_checkpoint(&dir)
}

/// Test-split metrics for one checkpoint; execution time is its training
/// wall time.
pub fn run_evaluate(layout: &Layout, mode: EmbeddingMode, arch: Architecture) -> Result<MetricsReport> {
    let (prepared, _) = load_prepared(layout)?;
    let model = load_trained(layout, mode, arch)?;
    let probs = predict_proba(&model, &prepared.test.seqs)?;
    let report = MetricsReport::evaluate(&probs.probs, &prepared.test.labels, model.wall_time)?;
    write_json(&layout.metrics_file(mode, arch.name()), &report)?;
    Ok(report)
}

/// Level-1 outputs written by [`run_ensemble`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePredictions {
    pub model_order: Vec<Architecture>,
    pub level0_test: StackInput,
    pub test_probabilities: PredictionVector,
    pub test_labels: Vec<u8>,
}

/// Fits the meta-learner on the validation outputs of the five checkpoints
/// of the current arm, scores every model on the test split and writes the
/// arm's report.
pub fn run_ensemble(layout: &Layout, settings: &PipelineSettings) -> Result<RunReport> {
    check_all_models(settings)?;
    let mode = settings.embedding_mode;
    let (prepared, _) = load_prepared(layout)?;
    let models = Architecture::ALL
        .iter()
        .map(|&a| load_trained(layout, mode, a))
        .collect::<Result<Vec<_>>>()?;
    let base_time: Duration = models.iter().map(|m| m.wall_time).sum();
    let (stacked, meta_time) = timed(|| {
        stack_trained(
            models,
            &prepared.validation.seqs,
            &prepared.validation.labels,
            &prepared.test.seqs,
            &settings.meta,
        )
    });
    let (ensemble, level0_test, preds) = stacked?;

    let labels = &prepared.test.labels;
    let mut base = Vec::new();
    for (m, arch) in ensemble.base_models.iter().zip(Architecture::ALL) {
        let metrics = MetricsReport::evaluate(&level0_test.column(base.len()), labels, m.wall_time)?;
        write_json(&layout.metrics_file(mode, arch.name()), &metrics)?;
        base.push((arch, metrics));
    }
    let ens_metrics = MetricsReport::evaluate(&preds.probs, labels, base_time + meta_time)?;
    write_json(&layout.metrics_file(mode, "ensemble"), &ens_metrics)?;
    ensemble.meta.save(&layout.arm_dir(mode).join("meta.json"))?;
    write_json(
        &layout.predictions_file(mode),
        &EnsemblePredictions {
            model_order: Architecture::ALL.to_vec(),
            level0_test,
            test_probabilities: preds,
            test_labels: labels.clone(),
        },
    )?;
    let report = RunReport::new(mode, &base, Some(&ens_metrics));
    report.save(&layout.run_report_file(mode))?;
    write_text(&layout.arm_dir(mode).join("report.md"), &report.to_markdown())?;
    Ok(report)
}

/// The full two-level procedure: `prepare`, `embed` (stacked arm only),
/// `train` for all five models, then the ensemble step.
pub fn run_stack(split: &DatasetSplit, settings: &PipelineSettings, layout: &Layout, seed: u64) -> Result<RunReport> {
    check_all_models(settings)?;
    run_prepare(split, settings, layout)?;
    if settings.embedding_mode == EmbeddingMode::StackedGloveFasttext {
        run_embed(layout, settings, seed)?;
    }
    run_train(layout, settings, &Architecture::ALL, seed)?;
    run_ensemble(layout, settings)
}

/// Renders every arm that has a report into `reports/report.md`.
pub fn run_report(layout: &Layout) -> Result<String> {
    let reports = [EmbeddingMode::TrainableMinimal, EmbeddingMode::StackedGloveFasttext]
        .iter()
        .map(|&m| layout.run_report_file(m))
        .filter(|p| p.exists())
        .map(|p| RunReport::load(&p))
        .collect::<Result<Vec<_>>>()?;
    if reports.is_empty() {
        return Err(Error::missing(
            "stack",
            format!("no run reports under {}", layout.reports_dir().display()),
        ));
    }
    let md = render_reports(&reports);
    write_text(&layout.report_markdown(), &md)?;
    Ok(md)
}
