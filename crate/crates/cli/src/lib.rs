//! `lfsgg` command-line front end. Every subcommand is also callable as a
//! library function so tests can drive it without spawning a process.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lfsgg_core::io::{self, GraphRecord, VocabularyFile};
use lfsgg_core::{MatchConfig, Vocabulary};
use serde::Serialize;

mod commands;

pub use commands::{cmd_codec, cmd_evaluate, cmd_match, cmd_retrieve, cmd_sweep_b, cmd_synth, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "lfsgg", version, about = "Location-free scene graph evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recall@K (and optionally precision/F1) over a dataset.
    Evaluate(EvaluateArgs),
    /// Print the instance mapping for one image.
    Match(MatchArgs),
    /// Aggregate recall and wall time for several branching factors.
    SweepB(SweepArgs),
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
    /// Convert between graph records and token sequences.
    #[command(subcommand)]
    Codec(CodecCommand),
    /// Rank a gallery against each query graph.
    Retrieve(RetrieveArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MatchOptions {
    #[arg(short = 'b', long, default_value_t = 3)]
    pub branching_factor: usize,
    #[arg(long)]
    pub directed_neighborhood: bool,
    /// Count ground-truth quintuples as a set.
    #[arg(long)]
    pub dedup_gt: bool,
    /// Rescore candidates on the graphs with visited instances removed.
    #[arg(long)]
    pub reduced_neighborhoods: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_branches: usize,
}

impl MatchOptions {
    pub fn config(&self) -> MatchConfig {
        MatchConfig {
            branching_factor: self.branching_factor,
            directed_neighborhood: self.directed_neighborhood,
            max_branches: self.max_branches,
            reduced_neighborhoods: self.reduced_neighborhoods,
            dedup_gt: self.dedup_gt,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    pub gt: PathBuf,
    pub pred: PathBuf,
    /// Vocabulary file or `preset:vg150` / `preset:psg`. Inferred from the
    /// inputs when omitted.
    #[arg(long)]
    pub vocab: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "20,50,100")]
    pub k: Vec<usize>,
    #[command(flatten)]
    pub matching: MatchOptions,
    /// Worker threads for per-image fan-out (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Also report precision and F1 on the full prediction.
    #[arg(long)]
    pub with_precision: bool,
    /// Include per-image matcher wall time (makes reports non-reproducible).
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MatchArgs {
    pub gt: PathBuf,
    pub pred: PathBuf,
    #[arg(long)]
    pub image_id: String,
    #[arg(long)]
    pub vocab: Option<String>,
    #[command(flatten)]
    pub matching: MatchOptions,
    /// Use the exhaustive oracle instead of tree search.
    #[arg(long)]
    pub exhaustive: bool,
    /// Print a JSON mapping record instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub gt: PathBuf,
    pub pred: PathBuf,
    #[arg(long)]
    pub vocab: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    pub b_list: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long)]
    pub directed_neighborhood: bool,
    #[arg(long)]
    pub dedup_gt: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON synthesis config; every field is optional.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_gt: PathBuf,
    #[arg(long)]
    pub out_pred: PathBuf,
    /// Planted instance mapping per image.
    #[arg(long)]
    pub out_mapping: Option<PathBuf>,
    #[arg(long)]
    pub out_vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum CodecCommand {
    /// Graph records to token lines (`image_id<TAB>tokens`).
    Encode {
        input: PathBuf,
        #[arg(long)]
        vocab: String,
        /// Shuffle quintuples before encoding; each image gets a derived seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Token lines back to graph records. Decode counts go to stderr.
    Decode {
        input: PathBuf,
        #[arg(long)]
        vocab: String,
        #[arg(long, default_value_t = 300)]
        max_quintuples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RetrieveArgs {
    /// Query records; each query's image id names its target in the gallery.
    pub queries: PathBuf,
    pub gallery: PathBuf,
    #[arg(long)]
    pub vocab: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,20")]
    pub k: Vec<usize>,
    #[arg(short = 'b', long, default_value_t = 3)]
    pub branching_factor: usize,
    /// Ranked entries kept per query in the output.
    #[arg(long, default_value_t = 20)]
    pub top_n: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Match(a) => cmd_match(&a, &mut std::io::stdout().lock()),
        Command::SweepB(a) => cmd_sweep_b(&a, &mut std::io::stdout().lock()).map(|_| ()),
        Command::Synth(a) => cmd_synth(&a),
        Command::Codec(c) => cmd_codec(&c, &mut std::io::stderr().lock()),
        Command::Retrieve(a) => cmd_retrieve(&a).map(|_| ()),
    }
}

/// Process exit code: 2 parse error, 3 vocabulary error, 4 matcher
/// resource error, 1 anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use lfsgg_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e.root() {
                E::Parse { .. } | E::UnknownImageId(_) | E::DuplicateImageId(_) => 2,
                E::UnknownLabel { .. } | E::IndexOutOfRange { .. } | E::VocabularyOverflow { .. } | E::InvalidVocabulary(_) => 3,
                E::BranchBudgetExceeded { .. } | E::SearchSpaceTooLarge { .. } => 4,
                _ => 1,
            };
        }
    }
    1
}

pub(crate) fn read_records(path: &Path) -> Result<Vec<(usize, GraphRecord)>> {
    io::read_records(path).with_context(|| path.display().to_string())
}

/// Explicit vocabulary, or the sorted label union of `inputs`.
pub(crate) fn vocabulary(source: Option<&str>, inputs: &[&[(usize, GraphRecord)]]) -> Result<Vocabulary> {
    match source {
        Some(source) => io::load_vocabulary(source).with_context(|| format!("vocabulary {source}")),
        None => {
            let all: Vec<GraphRecord> = inputs.iter().flat_map(|r| r.iter().map(|(_, g)| g.clone())).collect();
            Ok(VocabularyFile::infer(&all).into_vocabulary()?)
        }
    }
}

pub(crate) fn resolve(path: &Path, records: &[(usize, GraphRecord)], vocab: &Vocabulary) -> Result<Vec<lfsgg_core::SceneGraph>> {
    io::resolve_records(records, vocab).with_context(|| path.display().to_string())
}

pub(crate) fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| p.display().to_string())?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub(crate) fn write_pretty<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}
