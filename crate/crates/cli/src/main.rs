//! `pfa`: count-matrix factorization experiments from the command line.
//!
//! Four subcommands share one flat `key = value` config file:
//!
//! * `fit`       fit one model, emit trace/snapshot/factor report
//! * `eval`      held-out perplexity protocol over split replicates
//! * `simulate`  multi-scoop buffet-process simulation
//! * `report`    factor summary from an existing snapshot
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 unusable input data,
//! 4 numeric failure. Failures print one machine-readable JSON object to
//! stderr.

mod artifacts;
mod commands;
mod config;
mod ingest;

use clap::{Args, Parser, Subcommand};
use pfa_core::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "pfa", version, about = "Count-matrix factorization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model and write its artifacts.
    Fit(RunArgs),
    /// Train/test split replicates with held-out perplexity.
    Eval(RunArgs),
    /// Simulate the multi-scoop buffet process.
    Simulate(RunArgs),
    /// Summarize the factors of an existing snapshot.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config: flat `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for eval replicates; 1 is the determinism reference.
    #[arg(long)]
    threads: Option<usize>,
    /// Model variant (overrides the config): bgg, sgg, bg, dir, gap, gap-em.
    #[arg(long)]
    variant: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> config::Overrides {
        config::Overrides {
            seed: self.seed,
            threads: self.threads,
            variant: self.variant.clone(),
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Parse { .. } | Error::Data(_) | Error::Io(_) => 3,
        Error::Numeric(_) | Error::DegenerateCell { .. } | Error::DegenerateUpdate(_) => 4,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) | Error::Domain(_) => "config",
        Error::Parse { .. } | Error::Data(_) | Error::Io(_) => "data",
        Error::Numeric(_) | Error::DegenerateCell { .. } | Error::DegenerateUpdate(_) => "numeric",
    }
}

fn run(cli: &Cli) -> pfa_core::Result<()> {
    let (args, kind) = match &cli.command {
        Command::Fit(a) => (a, config::CommandKind::Fit),
        Command::Eval(a) => (a, config::CommandKind::Eval),
        Command::Simulate(a) => (a, config::CommandKind::Simulate),
        Command::Report(a) => (a, config::CommandKind::Report),
    };
    let cfg = config::ExperimentConfig::load(&args.config, &args.overrides())?;
    match kind {
        config::CommandKind::Fit => commands::cmd_fit(&cfg),
        config::CommandKind::Eval => commands::cmd_eval(&cfg),
        config::CommandKind::Simulate => commands::cmd_simulate(&cfg),
        config::CommandKind::Report => commands::cmd_report(&cfg),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        let payload = serde_json::json!({
            "kind": error_kind(&e),
            "message": e.to_string(),
        });
        eprintln!("{payload}");
        std::process::exit(exit_code(&e));
    }
}
