mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use commands::{EvaluateArgs, SummarizeArgs};
use config::RunConfig;

/// Structure-aware sentence summarization with copying.
#[derive(Parser)]
#[command(name = "structsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set train.batch_size=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Prune, build vocabularies and write encoded shards.
    Preprocess {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on preprocessed shards.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Decode summaries for a source file.
    Summarize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// CoNLL-U parses aligned with the input.
        #[arg(long)]
        parse: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// ROUGE scores, plus relation preservation when parses are given.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Source parses for relation preservation.
        #[arg(long)]
        parse: Option<PathBuf>,
        /// Score without Porter stemming.
        #[arg(long)]
        no_stem: bool,
        /// Also write rouge.tsv and relations.tsv here.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Relation preservation table across systems.
    AnalyzeRelations {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        parse: PathBuf,
        #[arg(long = "system", value_name = "NAME=FILE", required = true)]
        systems: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic parsed corpus and a matching config.
    MakeToy {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Preprocess { .. } => "preprocess",
            Command::Train { .. } => "train",
            Command::Summarize { .. } => "summarize",
            Command::Evaluate { .. } => "evaluate",
            Command::AnalyzeRelations { .. } => "analyze-relations",
            Command::MakeToy { .. } => "make-toy",
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Preprocess { common } => commands::preprocess(&common.load()?),
        Command::Train { common } => commands::train_cmd(&common.load()?),
        Command::Summarize {
            common,
            checkpoint,
            input,
            parse,
            output,
        } => {
            let args = SummarizeArgs {
                checkpoint,
                input,
                parse,
                output,
            };
            commands::summarize(&common.load()?, &args).map(|_| ())
        }
        Command::Evaluate {
            common,
            system,
            reference,
            parse,
            no_stem,
            output_dir,
        } => {
            let args = EvaluateArgs {
                system,
                reference,
                parse,
                no_stem,
                output_dir,
            };
            commands::evaluate(&common.load()?, &args)
        }
        Command::AnalyzeRelations {
            common,
            parse,
            systems,
            output,
        } => {
            let systems = systems
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(n, p)| (n.to_string(), PathBuf::from(p)))
                        .ok_or_else(|| anyhow!("--system `{s}` is not NAME=FILE"))
                })
                .collect::<Result<Vec<_>>>()?;
            commands::analyze_relations(&common.load()?, &parse, &systems, output.as_deref())
        }
        Command::MakeToy {
            output,
            pairs,
            seed,
        } => commands::make_toy(&output, pairs, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\\', "\\\\").replace('"', "\\\"");
            eprintln!("error command={name} message=\"{msg}\"");
            ExitCode::FAILURE
        }
    }
}
