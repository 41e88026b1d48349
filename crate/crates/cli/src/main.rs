use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crystal_flow_cli::{run_file, Action, RunOptions, EXIT_OK};
use rayon::prelude::*;

const OUT_DIR_ENV: &str = "CRYSTAL_FLOW_OUT";

/// Run crystalline elastic flow scenarios.
///
/// Exit status: 0 on success, 1 when a check or a run fails, 2 on input errors.
#[derive(Parser)]
#[command(name = "crystal-flow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; the CRYSTAL_FLOW_OUT environment variable takes precedence.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Evaluate the checks declared in each scenario.
    #[arg(long, global = true)]
    check: bool,
    /// Override the integration horizon.
    #[arg(long, global = true)]
    max_time: Option<f64>,
    /// Seed for scenario perturbations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Files {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a curve and write its series, epochs and snapshots.
    Simulate(Files),
    /// Build and round-trip stationary curves.
    Catalog(Files),
    /// Classify a stationary curve.
    Classify(Files),
    /// Test whether a curve translates.
    TranslatingCheck(Files),
    /// Sweep the facet identity over regular polygons.
    VerifyIdentity(Files),
    /// Compare dissipation residuals across integrator tolerances.
    Audit(Files),
}

impl Command {
    fn split(self) -> (Action, Vec<PathBuf>) {
        match self {
            Command::Simulate(f) => (Action::Simulate, f.files),
            Command::Catalog(f) => (Action::Catalog, f.files),
            Command::Classify(f) => (Action::Classify, f.files),
            Command::TranslatingCheck(f) => (Action::TranslatingCheck, f.files),
            Command::VerifyIdentity(f) => (Action::VerifyIdentity, f.files),
            Command::Audit(f) => (Action::Audit, f.files),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or(cli.out_dir);
    let opts = RunOptions {
        out_dir,
        check: cli.check,
        max_time: cli.max_time,
        seed: cli.seed,
    };
    let (action, files) = cli.command.split();
    let results: Vec<_> = files.par_iter().map(|f| run_file(action, f, &opts)).collect();

    let mut code = EXIT_OK;
    for (file, result) in files.iter().zip(results) {
        let c = match result {
            Ok(outcome) => {
                for check in outcome.checks.iter().filter(|c| !c.passed) {
                    eprintln!("{}: check {} failed: {}", outcome.name, check.name, check.detail);
                }
                let verdict = if outcome.passed() { "ok" } else { "FAILED" };
                println!("{} {}: {verdict}", outcome.action, outcome.name);
                outcome.exit_code()
            }
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                e.exit_code()
            }
        };
        code = code.max(c);
    }
    ExitCode::from(code as u8)
}
