use std::io::{Read, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpproj::api::{run_json, run_suite, Report, RunOptions};
use lpproj::Error;

/// Projections onto balls, masked balls, cylinders and subspaces of l_p,
/// with their directional derivatives and oracle checks.
#[derive(Parser)]
#[command(name = "lpproj", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one JSON request.
    Run {
        /// Request file, or `-` for stdin.
        #[arg(long, default_value = "-")]
        input: String,
        #[arg(long)]
        pretty: bool,
        /// Seed for the randomized oracles.
        #[arg(long)]
        seed: Option<u64>,
        /// Per-coordinate tolerance for `verify` against the brute oracle.
        #[arg(long)]
        tol_override: Option<f64>,
    },
    /// Run a property suite: invariants, oracle_equivalence or all.
    Suite {
        name: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        pretty: bool,
    },
}

fn read_input(path: &str) -> std::io::Result<String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (report, pretty) = match cli.command {
        Cmd::Run { input, pretty, seed, tol_override } => {
            let report = match read_input(&input) {
                Ok(text) => run_json(&text, &RunOptions { seed, tol_override }),
                Err(e) => Report::from_error(&Error::Schema(format!("cannot read {input}: {e}"))),
            };
            (report, pretty)
        }
        Cmd::Suite { name, seed, pretty } => (run_suite(&name, seed), pretty),
    };
    let _ = writeln!(std::io::stdout(), "{}", report.to_json(pretty));
    ExitCode::from(report.exit_code() as u8)
}
