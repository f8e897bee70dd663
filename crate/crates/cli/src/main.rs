use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use igmanova_cli::{run_scenario, CheckName, RunOptions};

/// Run a Monte Carlo scenario and write a JSON report plus raw CSV functionals.
#[derive(Debug, Parser)]
#[command(name = "igmanova", version)]
struct Args {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for report.json and functionals.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run only these checks (repeatable).
    #[arg(long = "check")]
    checks: Vec<CheckName>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions { trials: args.trials, seed: args.seed, only: args.checks, threads: args.threads };
    match run_scenario(&args.scenario, &args.out, &opts) {
        Ok(report) => {
            // A closed stdout must not turn a finished run into a panic.
            let mut out = io::stdout().lock();
            for r in &report.checks {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    out,
                    "{verdict} {:<20} statistic={:.3e} threshold={:.3e} ({:.0} ms)",
                    r.check.as_str(),
                    r.statistic,
                    r.threshold,
                    r.runtime_ms
                );
                if let Some(e) = &r.error {
                    let _ = writeln!(out, "     error: {e}");
                }
            }
            let _ = writeln!(out, "report written to {}", args.out.display());
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
