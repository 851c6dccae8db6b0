#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;

use config::{Command, ExperimentConfig, Settings};

#[derive(Parser)]
#[command(name = "sep", version, about = "Exclusion processes in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ExperimentConfig,
}

#[derive(Subcommand)]
enum Sub {
    /// One trajectory from the top state.
    Simulate(Common),
    /// Stationary law, mixing time and event-A quantities on a small segment.
    Exact(Common),
    /// Boundary-driven chain profiles, exact and Monte Carlo.
    Boundary(Common),
    /// Censored versus uncensored laws under the box scheme.
    Censor(Common),
    /// Mixing-time estimates over a size grid with a log-log slope.
    Scaling(Common),
    /// Oracle checks on small instances.
    Validate(Common),
}

const USAGE: u8 = 2;
const FAILURE: u8 = 1;

fn settings(command: Command, common: Common) -> Result<Settings, String> {
    let file = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Settings::resolve(command, common.flags.over(file))
}

fn usage_error(e: &sep_core::SepError) -> bool {
    use sep_core::SepError::*;
    matches!(
        e,
        InvalidLaw(_) | DivergentExpectation | NotBallistic(_) | InvalidParameter(_) | CapExceeded { .. } | Parse(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Exact(c) => (Command::Exact, c),
        Sub::Boundary(c) => (Command::Boundary, c),
        Sub::Censor(c) => (Command::Censor, c),
        Sub::Scaling(c) => (Command::Scaling, c),
        Sub::Validate(c) => (Command::Validate, c),
    };
    let s = match settings(command, common) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(USAGE);
        }
    };
    let report = match commands::run(&s) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<sep_core::SepError>().is_some_and(usage_error);
            return ExitCode::from(if usage { USAGE } else { FAILURE });
        }
    };
    let summary = json!({
        "command": s.command.name(),
        "settings": s,
        "results": report.summary,
        "failures": report.failures,
    });
    let written = std::fs::create_dir_all(&s.out)
        .and_then(|_| std::fs::write(s.out.join(format!("{}.csv", s.command.name())), &report.csv))
        .and_then(|_| {
            let text = serde_json::to_string_pretty(&summary).expect("summary is plain data");
            std::fs::write(s.out.join(format!("{}.json", s.command.name())), text + "\n")
        });
    if let Err(e) = written {
        eprintln!("error: writing to {}: {e}", s.out.display());
        return ExitCode::from(FAILURE);
    }
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &report.failures {
            eprintln!("check failed: {f}");
        }
        ExitCode::from(FAILURE)
    }
}
