mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use offtarget_core::tensorcore::FORMAT_VERSION;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "offtarget",
    about = "Classify the target of offensive tweets (IND, GRP, OTH)"
)]
struct Cli {
    /// Run configuration (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for splitting, initialization, dropout and shuffling; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the model file format version and exit
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize the tweet column of a dataset TSV
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        /// Emoticon table; defaults to `emoticon_table` from the config, then the bundled table
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Build the vocabulary from the training split
    Vocab,
    /// Train a model and write it with its epoch history
    Train,
    /// Label every row of `test_tsv`
    Predict,
    /// Score predictions against `test_tsv`
    Evaluate,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if cli.version {
        println!(
            "offtarget {} (model format OFFT{FORMAT_VERSION})",
            env!("CARGO_PKG_VERSION")
        );
        return Ok(());
    }
    let Some(command) = &cli.command else {
        anyhow::bail!("no subcommand given; see --help");
    };
    let cfg = load_config(&cli)?;
    match command {
        Command::Preprocess { input, output, table } => {
            let table = match table {
                Some(t) => Some(t.clone()),
                None => cfg.opt_path("emoticon_table")?,
            };
            let n = commands::preprocess_file(input, output, table)?;
            println!("{n} rows -> {}", output.display());
        }
        Command::Vocab => commands::vocab(&cfg)?,
        Command::Train => commands::train(&cfg)?,
        Command::Predict => commands::predict_file(&cfg)?,
        Command::Evaluate => commands::evaluate(&cfg)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
