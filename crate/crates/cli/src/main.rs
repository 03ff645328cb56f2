//! `kgctx`: batch front-end for building neighborhood-augmented datasets
//! and scoring model outputs.
//!
//! Settings come from flags, then a TOML config file (`--config` or
//! `KGCTX_CONFIG`), then `KGCTX_*` environment variables, then defaults.
//! Exit codes are listed in [`exit`].

mod commands;
mod config;
mod exit;
mod output;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use kgctx_core::evaluation::{AblationMetric, RemovalOrder};
use kgctx_core::oracle::OracleKind;
use kgctx_core::SplitTag;

use crate::config::Settings;
use crate::output::Output;

#[derive(Parser, Debug)]
#[command(name = "kgctx", version, about, propagate_version = true)]
struct Cli {
    /// TOML file with settings; keys match the long flag names with `_`
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    /// Print TSV only, without the table on stderr
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a triple file into a binary snapshot
    Ingest {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "train")]
        split: SplitTag,
    },
    /// Entity, relation and triple counts as TSV
    Stats {
        /// Triple files or snapshots; the configured splits when empty
        files: Vec<PathBuf>,
    },
    /// Build and cache the relation similarity matrix
    BuildSim {
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also list all relations by similarity to this one
        #[arg(long, value_name = "RELATION")]
        rank: Option<String>,
    },
    /// Write one dataset record per forward and inverse query of a split
    Emit {
        #[arg(long)]
        split: SplitTag,
        #[arg(short, long)]
        output: PathBuf,
        /// Also dump the formed neighborhoods
        #[arg(long, value_name = "PATH")]
        neighborhoods: Option<PathBuf>,
    },
    /// Filtered Hits@k and exact match of sampled predictions
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Rank against every entity without filtering known answers
        #[arg(long)]
        unfiltered: bool,
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        ks: Vec<usize>,
        /// Per-query ranks as TSV
        #[arg(long, value_name = "PATH")]
        ranks: Option<PathBuf>,
    },
    /// Hits@k by nearest entity embedding to the generated text
    EvalInductive {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Embeddings of the top generated text, keyed by query id
        #[arg(long)]
        generated: PathBuf,
        /// L2-normalize entity vectors instead of requiring unit norm
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        ks: Vec<usize>,
        #[arg(long, value_name = "PATH")]
        ranks: Option<PathBuf>,
    },
    /// Where the target occurs in the input, and EM per position
    AnalyzeTarget {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Metric as neighbors are removed from the input
    Ablate {
        #[arg(long)]
        split: SplitTag,
        #[arg(long, default_value = "hint_reader")]
        oracle: OracleKind,
        /// Answer of the constant oracle
        #[arg(long)]
        text: Option<String>,
        /// `relevant_first` or `random`
        #[arg(long, default_value = "relevant_first")]
        order: RemovalOrder,
        /// `target_prob` or `em`
        #[arg(long, default_value = "target_prob")]
        metric: AblationMetric,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8,16")]
        removals: Vec<usize>,
        /// Only the first N queries
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Chat prompts from records, or Hits@k of parsed chat answers
    #[command(subcommand)]
    Prompt(PromptCommand),
    /// Predictions from a reference model
    Oracle {
        #[arg(long)]
        kind: OracleKind,
        #[arg(long)]
        records: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        text: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum PromptCommand {
    Build {
        #[arg(long)]
        records: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Task only, without adjacent relations
        #[arg(long)]
        no_neighbors: bool,
    },
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        ks: Vec<usize>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = Settings::layer(cli.settings, cli.config.as_deref(), |k| {
        std::env::var(k).ok()
    })?;
    let config = settings.resolve()?;
    if let Some(n) = config.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let out = Output { quiet: cli.quiet };
    use commands as c;
    match cli.command {
        Command::Ingest {
            input,
            output,
            split,
        } => c::ingest(&config, &out, &input, &output, split),
        Command::Stats { files } => c::stats(&config, &out, &files),
        Command::BuildSim { output, rank } => {
            c::build_sim(&config, &out, output.as_deref(), rank.as_deref())
        }
        Command::Emit {
            split,
            output,
            neighborhoods,
        } => c::emit(&config, &out, split, &output, neighborhoods.as_deref()),
        Command::Score {
            records,
            predictions,
            unfiltered,
            ks,
            ranks,
        } => c::score(
            &config,
            &out,
            &records,
            &predictions,
            unfiltered,
            c::Scoring {
                ks: &ks,
                ranks: ranks.as_deref(),
            },
        ),
        Command::EvalInductive {
            records,
            predictions,
            generated,
            normalize,
            ks,
            ranks,
        } => c::eval_inductive(
            &config,
            &out,
            &records,
            &predictions,
            &generated,
            normalize,
            c::Scoring {
                ks: &ks,
                ranks: ranks.as_deref(),
            },
        ),
        Command::AnalyzeTarget {
            records,
            predictions,
        } => c::analyze_target(&config, &out, &records, &predictions),
        Command::Ablate {
            split,
            oracle,
            text,
            order,
            metric,
            removals,
            limit,
        } => c::ablate(
            &config,
            &out,
            c::AblateArgs {
                split,
                kind: oracle,
                text: text.as_deref(),
                order,
                metric,
                removals,
                limit,
            },
        ),
        Command::Prompt(PromptCommand::Build {
            records,
            output,
            no_neighbors,
        }) => c::prompt_build(&out, &records, &output, no_neighbors),
        Command::Prompt(PromptCommand::Score {
            records,
            answers,
            ks,
        }) => c::prompt_score(&config, &out, &records, &answers, &ks),
        Command::Oracle {
            kind,
            records,
            output,
            text,
        } => c::oracle(&config, &out, kind, &records, &output, text.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
    }
}
