//! Argument parsing and dispatch for the `stackguard` binary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use stackguard_core::corpus::write_csv_to;
use stackguard_core::experiment::ExperimentConfig;
use stackguard_core::pipeline::PipelineSettings;
use stackguard_core::stages::{self, Layout};
use stackguard_core::synth::{generate_synthetic_corpus, SynthProfile};
use stackguard_core::{Architecture, EmbeddingMode, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "stackguard", version, about = "Buffer-overflow classifiers and their stacking ensemble")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Experiment configuration (JSON)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory; overrides `output_dir` from the config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Embedding arm: `minimal` or `stacked`
    #[arg(long, global = true)]
    pub embedding: Option<EmbeddingMode>,

    /// Train the five base models on separate threads
    #[arg(long, global = true)]
    pub parallel_base_models: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Token frequency table of the configured data
    Stats,
    /// Split, build the vocabulary and encode every split
    Prepare,
    /// Train and export GloVe, fastText, word2vec and stacked embeddings
    Embed,
    /// Fit base models and checkpoint them (all five without --model)
    Train {
        #[arg(long)]
        model: Option<Architecture>,
    },
    /// Run the whole two-level procedure
    Stack {
        /// Only fit the meta-learner over existing checkpoints
        #[arg(long)]
        reuse_checkpoints: bool,
    },
    /// Test-split metrics for checkpoints (all five without --model)
    Evaluate {
        #[arg(long)]
        model: Option<Architecture>,
    },
    /// Render the markdown tables of every finished arm
    Report,
    /// Write a seeded synthetic corpus as CSV
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = SynthProfile::RiskyCalls)]
        profile: SynthProfile,
        /// Destination file; stdout when absent
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Config with command-line overrides applied.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub settings: PipelineSettings,
    pub layout: Layout,
    pub seed: u64,
}

pub fn resolve(global: &GlobalArgs) -> Result<Resolved> {
    let path = global
        .config
        .as_deref()
        .ok_or_else(|| Error::config("--config", "this command needs an experiment config"))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(mode) = global.embedding {
        config.embedding.mode = mode;
    }
    if global.parallel_base_models {
        config.parallel_base_models = true;
    }
    let settings = config.settings()?;
    let seed = config.seed;
    Ok(Resolved {
        layout: Layout::new(out_dir(global, Some(&config))),
        settings,
        config,
        seed,
    })
}

fn out_dir(global: &GlobalArgs, config: Option<&ExperimentConfig>) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn models(model: Option<Architecture>) -> Vec<Architecture> {
    model.map_or_else(|| Architecture::ALL.to_vec(), |m| vec![m])
}

fn emit(out: &mut dyn std::io::Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(PathBuf::from("<stdout>"), e))
}

/// Executes one subcommand, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth {
            n,
            noise,
            profile,
            output,
        } => {
            let seed = match (g.seed, &g.config) {
                (Some(s), _) => s,
                (None, Some(p)) => ExperimentConfig::load(p)?.seed,
                (None, None) => return Err(Error::config("--seed", "synth needs --seed or a config")),
            };
            let data = generate_synthetic_corpus(*n, *profile, *noise, seed)?;
            match output {
                Some(path) => write_file(path, |w| write_csv_to(w, &data)),
                None => write_csv_to(out, &data),
            }
        }
        Command::Report => {
            let config = match &g.config {
                Some(p) => Some(ExperimentConfig::load(p)?),
                None => None,
            };
            let md = stages::run_report(&Layout::new(out_dir(g, config.as_ref())))?;
            emit(out, &md)
        }
        Command::Stats => {
            let r = resolve(g)?;
            let data = r.config.load_all()?;
            let path = stages::run_stats(&data, &r.settings.tokenizer, &r.layout)?;
            emit(out, &format!("wrote {}\n", path.display()))
        }
        Command::Prepare => {
            let r = resolve(g)?;
            let split = r.config.load_split()?;
            let p = stages::run_prepare(&split, &r.settings, &r.layout)?;
            emit(
                out,
                &format!(
                    "vocabulary {} tokens; train {}, validation {}, test {}\n",
                    p.vocab.size(),
                    p.train.len(),
                    p.validation.len(),
                    p.test.len()
                ),
            )
        }
        Command::Embed => {
            let r = resolve(g)?;
            let paths = stages::run_embed(&r.layout, &r.settings, r.seed)?;
            for p in [&paths.glove, &paths.fasttext, &paths.word2vec, &paths.stacked] {
                emit(out, &format!("wrote {}\n", p.display()))?;
            }
            Ok(())
        }
        Command::Train { model } => {
            let r = resolve(g)?;
            let trained = stages::run_train(&r.layout, &r.settings, &models(*model), r.seed)?;
            for m in &trained {
                let last = m.history.last().map(|h| h.train_loss).unwrap_or(f64::NAN);
                emit(
                    out,
                    &format!(
                        "{} [{}]: final train loss {last:.4}, {:.1}s\n",
                        m.config.architecture,
                        r.settings.embedding_mode.tag(),
                        m.wall_time.as_secs_f64()
                    ),
                )?;
            }
            Ok(())
        }
        Command::Evaluate { model } => {
            let r = resolve(g)?;
            for a in models(*model) {
                let m = stages::run_evaluate(&r.layout, r.settings.embedding_mode, a)?;
                let json = serde_json::to_string(&m).map_err(|e| Error::Format(e.to_string()))?;
                emit(out, &format!("{a}: {json}\n"))?;
            }
            Ok(())
        }
        Command::Stack { reuse_checkpoints } => {
            let r = resolve(g)?;
            let report = if *reuse_checkpoints {
                stages::run_ensemble(&r.layout, &r.settings)?
            } else {
                let split = r.config.load_split()?;
                stages::run_stack(&split, &r.settings, &r.layout, r.seed)?
            };
            emit(out, &report.to_markdown_section())
        }
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    body(&mut f)?;
    f.flush().map_err(|e| Error::io(path, e))
}
