//! Scenarios, configuration, persistence and plotting behind the `bhnls` command.

pub mod config;
pub mod data;
pub mod fit;
pub mod output;
pub mod scenarios;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Scenario};

use crate::error::{Error, Result};
use crate::grid::RadialField;

pub const SUMMARY_SCHEMA: &str = "bhnls.run-summary/1";

/// Exit status of the command line tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ChecksFailed = 1,
    ConfigError = 2,
    InternalError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::Config(_) => ExitStatus::ConfigError,
            _ => ExitStatus::InternalError,
        }
    }
}

/// One pass/fail line of a run summary, tagged with the acceptance criterion it serves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub criterion: Option<u8>,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, criterion: Option<u8>, passed: bool, measured: f64, threshold: f64, detail: String) -> Self {
        Check { name: name.to_string(), criterion, passed, measured, threshold, detail }
    }

    /// Passes when `measured <= threshold`.
    pub fn at_most(name: &str, criterion: Option<u8>, measured: f64, threshold: f64, detail: String) -> Self {
        Check::new(name, criterion, measured <= threshold, measured, threshold, detail)
    }

    /// Passes when `measured >= threshold`.
    pub fn at_least(name: &str, criterion: Option<u8>, measured: f64, threshold: f64, detail: String) -> Self {
        Check::new(name, criterion, measured >= threshold, measured, threshold, detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema: String,
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub guard_events: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exit_status(&self) -> ExitStatus {
        if self.scenario.is_demo() {
            return ExitStatus::Success;
        }
        if self.passed() && self.guard_events.is_empty() {
            ExitStatus::Success
        } else {
            ExitStatus::ChecksFailed
        }
    }
}

/// Everything a scenario hands back.
#[derive(Default)]
pub struct ScenarioResult {
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub guard_events: Vec<String>,
    /// Final fields of the primary trajectories, kept for sweep-level convergence fits.
    pub finals: Vec<RadialField>,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub finals: Vec<RadialField>,
}

/// Runs a scenario, writing `summary.json`, CSV series and SVG charts under `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut dir = output::OutputDir::create(out)?;
    let result = scenarios::execute(config, &mut dir)?;
    let mut files = dir.files().to_vec();
    files.push("summary.json".into());
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA.into(),
        scenario: config.scenario,
        config: config.clone(),
        checks: result.checks,
        metrics: result.metrics,
        files,
        guard_events: result.guard_events,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_vec_pretty(&summary).map_err(|e| Error::Output(e.to_string()))?;
    dir.write("summary.json", &json)?;
    Ok(RunOutcome { summary, finals: result.finals })
}
