mod cli;
mod commands;
mod work;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Synth { n, out } => commands::synth(g, n, &out),
        Command::Preprocess { input, fractions } => commands::preprocess(g, &input, fractions),
        Command::Train { model, epochs, resume } => commands::train(g, model, epochs, resume),
        Command::Evaluate { model, average, threshold } => commands::evaluate_cmd(g, model, average, threshold),
        Command::Predict { input, out, model, weights, threshold } => {
            commands::predict(g, &input, &out, model, weights.as_deref(), threshold)
        }
        Command::Ablate { seeds, epochs, average } => commands::ablate(g, &seeds, epochs, average),
        Command::Report { qualitative } => commands::report(g, qualitative),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
