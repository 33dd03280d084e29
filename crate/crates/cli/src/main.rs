//! Operator front end. Exit codes: 0 success, 1 runtime/data error, 2 usage
//! error (the parser handles 2 itself).

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, CorpusCmd};
use config::FileConfig;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Corpus { action } => match action {
            CorpusCmd::Build(args) => commands::corpus_build(args, &file_cfg),
            CorpusCmd::Synth(args) => commands::corpus_synth(args, &file_cfg),
            CorpusCmd::Stats(args) => commands::corpus_stats(args),
        },
        Command::Train(args) => commands::train(args, &file_cfg),
        Command::Eval(args) => commands::eval(args),
        Command::Classify(args) => commands::classify(args, &file_cfg),
        Command::Export(args) => commands::export(args),
    }
}
