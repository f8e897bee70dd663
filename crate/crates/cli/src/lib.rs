//! Scenario-driven Monte Carlo driver for the `igmanova` crate.

pub mod checks;
pub mod report;
pub mod scenario;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use report::{CheckRecord, Report, REPORT_VERSION};
pub use scenario::{CheckName, Scenario, Setup};
pub use stats::{ks_two_sample, KsResult, StatsError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Numerical(#[from] igmanova::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation { .. } => 2,
            _ => 1,
        }
    }
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub only: Vec<CheckName>,
    pub threads: Option<usize>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Scenario::from_json(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Applies the overrides, validates, and returns the adjusted scenario.
pub fn prepare(mut scenario: Scenario, opts: &RunOptions) -> Result<Scenario, CliError> {
    if let Some(t) = opts.trials {
        scenario.trials = t;
    }
    if let Some(s) = opts.seed {
        scenario.master_seed = s;
    }
    if !opts.only.is_empty() {
        scenario.checks.retain(|c| opts.only.contains(c));
        if scenario.checks.is_empty() {
            return Err(CliError::Validation {
                field: "--check".into(),
                message: "no requested check is listed in the scenario".into(),
            });
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Runs every check of a validated scenario. Numerical failures inside a
/// check are recorded as a failed check rather than aborting the run.
pub fn run_checks(scenario: &Scenario, threads: Option<usize>) -> Result<Report, CliError> {
    let setup = Setup::build(scenario)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Check(e.to_string()))?;
    let mut records = Vec::new();
    let mut functionals = Vec::new();
    for &check in &scenario.checks {
        let start = Instant::now();
        let ctx = checks::Ctx::new(&setup, check, scenario.trials, scenario.master_seed);
        let result = pool.install(|| checks::run(check, &ctx));
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let record = match result {
            Ok(out) => {
                functionals.extend(out.functionals.into_iter().map(|f| (check, f)));
                CheckRecord {
                    check,
                    property: check.property().to_string(),
                    statistic: out.statistic,
                    threshold: out.threshold,
                    pass: out.pass,
                    runtime_ms,
                    trials: scenario.trials,
                    details: out.details,
                    error: None,
                }
            }
            Err(e) => CheckRecord {
                check,
                property: check.property().to_string(),
                statistic: f64::NAN,
                threshold: f64::NAN,
                pass: false,
                runtime_ms,
                trials: scenario.trials,
                details: Default::default(),
                error: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    Ok(Report {
        report_version: REPORT_VERSION,
        scenario: scenario.name.clone(),
        master_seed: scenario.master_seed,
        trials: scenario.trials,
        significance: scenario.significance,
        pass: records.iter().all(|r| r.pass),
        checks: records,
        functionals,
    })
}

/// Loads, validates and runs a scenario, writing `report.json` and
/// `functionals.csv` into `out_dir`.
pub fn run_scenario(path: &Path, out_dir: &Path, opts: &RunOptions) -> Result<Report, CliError> {
    let scenario = prepare(load_scenario(path)?, opts)?;
    let report = run_checks(&scenario, opts.threads)?;
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| CliError::Io { path: p.clone(), source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let json = out_dir.join("report.json");
    fs::write(&json, report.to_json() + "\n").map_err(io(&json))?;
    let csv = out_dir.join("functionals.csv");
    fs::write(&csv, report.csv_string()).map_err(io(&csv))?;
    Ok(report)
}
