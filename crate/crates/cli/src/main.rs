//! `distinguish`: simulate populations, score and order questions, evaluate
//! orderings, tabulate the optimal laws and run live equality tests.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::HasCommon;

#[derive(Parser, Debug)]
#[command(name = "distinguish", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic response matrix.
    Simulate(commands::SimulateArgs),
    /// Score and order the questions of a matrix.
    Score(commands::ScoreArgs),
    /// Evaluate a heuristic over many seeded runs.
    Experiment(commands::ExperimentArgs),
    /// Tabulate the optimal laws or brute-force the best question sets.
    Theory(commands::TheoryArgs),
    /// Correct-count histogram against its binomial reference.
    Analyze(commands::AnalyzeArgs),
    /// Questions needed as the population grows.
    Scalability(commands::ScalabilityArgs),
    /// Live equality test between two models.
    Interrogate(commands::InterrogateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            report(first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

fn report(message: &str) {
    eprintln!("{}", serde_json::json!({ "error": message }));
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => run(&a, commands::simulate),
        Command::Score(a) => run(&a, commands::score),
        Command::Experiment(a) => run(&a, commands::experiment),
        Command::Theory(a) => run(&a, commands::theory),
        Command::Analyze(a) => run(&a, commands::analyze),
        Command::Scalability(a) => run(&a, commands::scalability),
        Command::Interrogate(a) => run(&a, commands::interrogate),
    }
}

/// Merges the config file, then runs `f` on a pool of `--jobs` threads.
fn run<T, F>(cli: &T, f: F) -> Result<()>
where
    T: Serialize + DeserializeOwned + Default + HasCommon + Send,
    F: FnOnce(T) -> Result<()> + Send,
{
    let args = config::merge(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.common().jobs()?)
        .build()?;
    pool.install(|| f(args))
}
