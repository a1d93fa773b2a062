//! Experiment runner. `run` executes a TOML config and writes a JSON
//! report plus a per-seed CSV, `validate` checks a config without running,
//! `list` prints the catalog. Exit codes: 0 all checks passed, 1 a check
//! failed, 2 the config or the run itself was broken.

mod catalog;
mod config;
mod report;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use colearn::experiments::{Comparison, ExperimentReport};

use crate::catalog::CATALOG;
use crate::config::AnyParams;
use crate::report::{ConfigEcho, ReportFile, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "colearn",
    version,
    about = "Runs collaborative-learning resilience experiments from config files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file and write reports.
    Run {
        /// TOML config file naming an experiment and its parameters.
        config: PathBuf,
        /// Worker threads for seed-parallel experiments.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory the JSON and CSV reports are written to.
        #[arg(long, default_value = "reports")]
        output: PathBuf,
        /// Comma-separated seeds replacing the configured list.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        seed_override: Option<Vec<u64>>,
    },
    /// Parse and gate-check a config file without running it.
    Validate {
        config: PathBuf,
        /// Comma-separated seeds replacing the configured list.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        seed_override: Option<Vec<u64>>,
    },
    /// Print the experiment catalog.
    List {
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, jobs, output, seed_override } => {
            cmd_run(&config, jobs, &output, seed_override)
        }
        Command::Validate { config, seed_override } => cmd_validate(&config, seed_override),
        Command::List { json } => cmd_list(json),
    }
}

fn load(config: &Path, seed_override: Option<Vec<u64>>) -> Result<AnyParams, String> {
    let text = fs::read_to_string(config)
        .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
    let mut params = AnyParams::parse(&text).map_err(|e| e.to_string())?;
    if let Some(seeds) = seed_override {
        params.override_seeds(&seeds).map_err(|e| e.to_string())?;
    }
    Ok(params)
}

fn cmd_run(
    config: &Path,
    jobs: usize,
    output: &Path,
    seed_override: Option<Vec<u64>>,
) -> ExitCode {
    let params = match load(config, seed_override) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = params.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let echo = ConfigEcho { experiment: params.name(), params: params.to_json() };

    let failure = match catch_unwind(AssertUnwindSafe(|| params.run(jobs))) {
        Ok(Ok(report)) => {
            let file = ReportFile {
                schema_version: SCHEMA_VERSION,
                incomplete: false,
                error: None,
                config: echo,
                report: Some(&report),
            };
            let json = match report::write_json(output, &report.name, &file) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot write report: {e}");
                    return ExitCode::from(2);
                }
            };
            let csv = match report::write_csv(output, &report) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot write metrics: {e}");
                    return ExitCode::from(2);
                }
            };
            print_summary(&report, &json, &csv);
            return if report.verdict { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
        Ok(Err(e)) => e.to_string(),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            format!("run aborted: {msg}")
        }
    };

    // The run died mid-flight: leave a report marked incomplete behind so a
    // later reader cannot mistake it for a finished one.
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        incomplete: true,
        error: Some(failure.clone()),
        config: echo,
        report: None,
    };
    if let Err(e) = report::write_json(output, params.name(), &file) {
        eprintln!("error: cannot write report: {e}");
    }
    eprintln!("error: {failure}");
    ExitCode::from(2)
}

fn cmd_validate(config: &Path, seed_override: Option<Vec<u64>>) -> ExitCode {
    let params = match load(config, seed_override) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match params.validate() {
        Ok(()) => {
            println!("ok: {} configuration is valid", params.name());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_list(json: bool) -> ExitCode {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(CATALOG.as_slice()).expect("catalog serializes")
        );
    } else {
        for e in &CATALOG {
            println!("{:<20} {:<34} {}", e.name, e.claim, e.summary);
        }
    }
    ExitCode::SUCCESS
}

fn print_summary(report: &ExperimentReport, json: &Path, csv: &Path) {
    println!("experiment {} ({} seeds)", report.name, report.seeds.len());
    for c in &report.checks {
        let op = match c.comparison {
            Comparison::LessEq => "<=",
            Comparison::GreaterEq => ">=",
        };
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("  [{tag}] {}: {} {op} {}", c.name, c.observed, c.threshold);
    }
    println!("verdict: {}", if report.verdict { "pass" } else { "fail" });
    println!("report: {}", json.display());
    println!("metrics: {}", csv.display());
}
