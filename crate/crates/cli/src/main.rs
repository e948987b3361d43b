mod args;
mod commands;
mod files;
mod pipeline;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use refesr::{Error, Result};

use crate::args::{Cli, Command};

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("REFESR_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("REFESR_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn run(cmd: &Command) -> Result<()> {
    configure_threads()?;
    match cmd {
        Command::Degrade(a) => commands::degrade(a, cmd),
        Command::LearnPrior(a) => commands::learn_prior(a, cmd),
        Command::Superres(a) => commands::superres(a, cmd),
        Command::Evaluate(a) => commands::evaluate_cmd(a, cmd),
        Command::Sweep(a) => commands::sweep(a, cmd),
        Command::SynthCorpus(a) => commands::synth_corpus(a, cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: E_USAGE: {first}");
            return ExitCode::from(2);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
