use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bhnls::harness::sweep::{sweep, SweepPlan};
use bhnls::harness::{run, ExitStatus, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "bhnls", version, about = "Radial focusing energy-critical biharmonic NLS laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV, JSON and SVG outputs.
    Run {
        #[arg(long)]
        scenario: String,
        /// Flat `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a configuration key, e.g. `--set dt=1e-4`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a plan of runs in parallel and fit convergence orders over them.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(status: ExitStatus, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("bhnls: {msg}");
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitStatus::ConfigError.code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli.command {
        Command::Run { scenario, config, sets, out, seed } => {
            let scenario: Scenario = match scenario.parse() {
                Ok(s) => s,
                Err(e) => return fail(ExitStatus::ConfigError, e),
            };
            let cfg = match ExperimentConfig::load(scenario, config.as_deref(), &sets, seed) {
                Ok(c) => c,
                Err(e) => return fail(ExitStatus::for_error(&e), e),
            };
            match run(&cfg, &out) {
                Ok(outcome) => {
                    let s = &outcome.summary;
                    for c in &s.checks {
                        let tag = c.criterion.map(|k| format!("[{k}] ")).unwrap_or_default();
                        println!(
                            "{} {tag}{}: measured {:.6e}, threshold {:.6e}",
                            if c.passed { "PASS" } else { "FAIL" },
                            c.name,
                            c.measured,
                            c.threshold
                        );
                    }
                    for g in &s.guard_events {
                        println!("GUARD {g}");
                    }
                    ExitCode::from(s.exit_status().code() as u8)
                }
                Err(e) => fail(ExitStatus::for_error(&e), e),
            }
        }
        Command::Sweep { plan, out } => {
            let plan = match SweepPlan::load(&plan) {
                Ok(p) => p,
                Err(e) => return fail(ExitStatus::for_error(&e), e),
            };
            match sweep(&plan, &out) {
                Ok(report) => {
                    for r in &report.runs {
                        println!("{} {} exit {}", r.label, r.scenario, r.exit_code);
                    }
                    for f in &report.fits {
                        match (&f.value, &f.error) {
                            (Some(v), _) => println!("fit {:?} over {}: {v:.6}", f.kind, f.runs.join(", ")),
                            (_, Some(e)) => println!("fit {:?} over {}: {e}", f.kind, f.runs.join(", ")),
                            _ => {}
                        }
                    }
                    ExitCode::from(report.exit_status().code() as u8)
                }
                Err(e) => fail(ExitStatus::for_error(&e), e),
            }
        }
    }
}
