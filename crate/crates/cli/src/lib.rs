//! The `pacte` command line: runs the polarized-topic pipeline stage by
//! stage over a cached working directory.

pub mod cache;
pub mod config;
pub mod pipeline;
pub mod report;

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use pacte::polarization::VariantMode;

pub use cache::StageStatus;
pub use config::PipelineConfig;
pub use pipeline::{Pipeline, StageRun};
pub use report::emit_report;

#[derive(Debug, Parser)]
#[command(
    name = "pacte",
    version,
    about = "Detect and rank polarized topics between partisan corpora"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, normalize and build the vocabulary.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write `{"id", "side", "tokens"}` JSONL here.
        #[arg(long)]
        export_tokens: Option<PathBuf>,
    },
    /// Train the topic model with a fixed K.
    Lda(CommonArgs),
    /// Train one topic model per K in a range and keep the most coherent.
    SelectK {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        k_min: usize,
        #[arg(long)]
        k_max: usize,
    },
    /// Train the partisanship encoders the variants need.
    Train(CommonArgs),
    /// Write an embedding store of every document.
    Embed {
        #[command(flatten)]
        common: CommonArgs,
        /// Defaults to `<workdir>/embeddings/<variant>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score and rank topics for every variant and pair.
    Rank(CommonArgs),
    /// Score topics with the leave-out estimator.
    Loe(CommonArgs),
    /// Recall of every method against the annotations.
    Eval(CommonArgs),
    /// Render report.md and report.json from existing artifacts.
    Report {
        #[arg(long, env = config::WORKDIR_ENV)]
        workdir: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Every stage, then the report.
    Pipeline(CommonArgs),
}

/// Flags shared by the stage commands. Each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = config::WORKDIR_ENV)]
    pub workdir: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub source_map: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub lemmas: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub embedding_store: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Seeds both the topic model and the encoder.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "exclude-topic")]
    pub exclude_topics: Vec<usize>,
    #[arg(long)]
    pub top_keywords: Option<usize>,
    #[arg(long)]
    pub top_documents: Option<usize>,
    /// Repeatable; replaces the configured variants.
    #[arg(long = "variant")]
    pub variants: Vec<VariantMode>,
    /// `LIBERAL:CONSERVATIVE`; repeatable; replaces the configured pairs.
    #[arg(long = "pair", value_parser = parse_pair)]
    pub pairs: Vec<[String; 2]>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub no_loe: bool,
}

fn parse_pair(s: &str) -> Result<[String; 2], String> {
    match s.split_once(':') {
        Some((l, r)) if !l.is_empty() && !r.is_empty() => Ok([l.to_string(), r.to_string()]),
        _ => Err(format!("expected LIBERAL:CONSERVATIVE, got {s:?}")),
    }
}

impl CommonArgs {
    /// The config file (or defaults) with these flags applied.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let p = &mut c.paths;
        if let Some(w) = &self.workdir {
            p.workdir = w.clone();
        }
        for (flag, slot) in [
            (&self.corpus, &mut p.corpus),
            (&self.source_map, &mut p.source_map),
            (&self.stopwords, &mut p.stopwords),
            (&self.lemmas, &mut p.lemmas),
            (&self.annotations, &mut p.annotations),
            (&self.embedding_store, &mut p.embedding_store),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(k) = self.k {
            c.lda.k = k;
            c.lda.k_grid = None;
        }
        if let Some(i) = self.iterations {
            c.lda.iterations = i;
        }
        if let Some(seed) = self.seed {
            c.lda.seed = seed;
            c.train.seed = seed;
        }
        c.lda.exclude_topics.extend(&self.exclude_topics);
        if let Some(m) = self.top_keywords {
            c.top_keywords = m;
        }
        if let Some(n) = self.top_documents {
            c.top_documents = n;
        }
        if !self.variants.is_empty() {
            c.variants.clone_from(&self.variants);
        }
        if !self.pairs.is_empty() {
            c.pairs.clone_from(&self.pairs);
        }
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            c.train.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            c.train.batch_size = b;
        }
        if self.no_loe {
            c.loe = false;
        }
        Ok(c)
    }
}

/// Runs one command and returns the stages it went through.
pub fn run(command: Command) -> Result<Vec<StageRun>> {
    let mut pipeline = match &command {
        Command::Report { workdir, config } => {
            let root = match (workdir, config) {
                (Some(w), _) => w.clone(),
                (None, Some(c)) => PipelineConfig::load(c)?.paths.workdir,
                (None, None) => PipelineConfig::default().paths.workdir,
            };
            let (md, _) = emit_report(&root)?;
            log::info!("wrote {}", md.display());
            return Ok(Vec::new());
        }
        Command::Preprocess { common, .. }
        | Command::SelectK { common, .. }
        | Command::Embed { common, .. }
        | Command::Lda(common)
        | Command::Train(common)
        | Command::Rank(common)
        | Command::Loe(common)
        | Command::Eval(common)
        | Command::Pipeline(common) => {
            let mut config = common.resolve()?;
            if let Command::SelectK { k_min, k_max, .. } = &command {
                config.lda.k_grid = Some([*k_min, *k_max]);
            }
            Pipeline::new(config)?
        }
    };
    pipeline.preprocess()?;
    match command {
        Command::Preprocess { export_tokens, .. } => {
            if let Some(dest) = export_tokens {
                pipeline.export_tokens(&dest)?;
            }
        }
        Command::Lda(_) | Command::SelectK { .. } => pipeline.topics()?,
        Command::Train(_) => {
            pipeline.topics()?;
            pipeline.train()?;
        }
        Command::Embed { out, .. } => {
            let mode = *pipeline
                .config()
                .variants
                .first()
                .ok_or_else(|| anyhow!("embed needs a variant"))?;
            pipeline.topics()?;
            pipeline.train()?;
            let index = pipeline.embed(mode, out.as_deref())?;
            log::info!("wrote {}", index.display());
        }
        Command::Rank(_) => {
            pipeline.topics()?;
            pipeline.train()?;
            pipeline.rank()?;
        }
        Command::Loe(_) => {
            pipeline.topics()?;
            pipeline.loe()?;
        }
        Command::Eval(_) => {
            pipeline.topics()?;
            pipeline.train()?;
            pipeline.rank()?;
            if pipeline.config().loe {
                pipeline.loe()?;
            }
            pipeline.eval()?;
        }
        Command::Pipeline(_) => {
            pipeline.topics()?;
            pipeline.train()?;
            pipeline.rank()?;
            if pipeline.config().loe {
                pipeline.loe()?;
            }
            pipeline.eval()?;
            pipeline.report()?;
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    Ok(pipeline.stages().to_vec())
}
