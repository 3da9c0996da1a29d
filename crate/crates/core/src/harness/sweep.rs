//! Batches of runs from a plan file, executed in parallel, with convergence fits over them.
//!
//! ```toml
//! [[run]]
//! scenario = "stationary_ground_state"
//! label = "dt2"
//! set = { dt = 2e-4, acceptance_checks = false }
//!
//! [[fit]]
//! kind = "self_convergence"
//! runs = ["dt2", "dt1", "dt05"]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use super::fit::{log_slope, self_convergence_order};
use super::output::OutputDir;
use super::{run, ExitStatus, RunSummary};
use crate::error::{Error, Result};
use crate::grid::RadialField;

pub const SWEEP_SCHEMA: &str = "bhnls.sweep/1";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    #[serde(default)]
    pub run: Vec<PlannedRun>,
    #[serde(default)]
    pub fit: Vec<PlannedFit>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedRun {
    pub scenario: Scenario,
    pub label: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub set: toml::Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Order from the self-differences of three final fields on a shared grid.
    SelfConvergence,
    /// Log-log slope of a summary metric against a configuration value.
    PowerLaw,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedFit {
    pub kind: FitKind,
    pub runs: Vec<String>,
    #[serde(default = "default_factor")]
    pub factor: f64,
    pub metric: Option<String>,
    pub against: Option<String>,
}

fn default_factor() -> f64 {
    2.0
}

impl SweepPlan {
    pub fn parse(text: &str) -> Result<Self> {
        let plan: SweepPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let labels = plan.labels();
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::Config(format!("duplicate run label '{l}'")));
            }
        }
        for f in &plan.fit {
            for r in &f.runs {
                if !seen.contains(r) {
                    return Err(Error::Config(format!("fit refers to unknown run '{r}'")));
                }
            }
            if f.kind == FitKind::PowerLaw && (f.metric.is_none() || f.against.is_none()) {
                return Err(Error::Config("power_law fits need 'metric' and 'against'".into()));
            }
        }
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        SweepPlan::parse(&text)
    }

    fn labels(&self) -> Vec<String> {
        self.run
            .iter()
            .enumerate()
            .map(|(i, r)| r.label.clone().unwrap_or_else(|| format!("{i:03}-{}", r.scenario)))
            .collect()
    }

    /// Resolves every run to a validated configuration.
    pub fn configs(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        self.labels()
            .into_iter()
            .zip(&self.run)
            .map(|(label, r)| {
                let mut pairs: Vec<(String, toml::Value)> = r.set.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                if let Some(seed) = r.seed {
                    pairs.push(("seed".into(), toml::Value::Integer(seed as i64)));
                }
                let cfg = ExperimentConfig::defaults(r.scenario)
                    .with_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.clone())))
                    .map_err(|e| Error::Config(format!("run '{label}': {e}")))?;
                Ok((label, cfg))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub exit_code: i32,
    pub checks_passed: usize,
    pub checks_total: usize,
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub kind: FitKind,
    pub runs: Vec<String>,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub runs: Vec<RunRecord>,
    pub fits: Vec<FitRecord>,
    pub failed_runs: usize,
}

impl SweepReport {
    pub fn exit_status(&self) -> ExitStatus {
        if self.failed_runs == 0 && self.fits.iter().all(|f| f.error.is_none()) {
            ExitStatus::Success
        } else {
            ExitStatus::ChecksFailed
        }
    }
}

struct Finished {
    record: RunRecord,
    config: ExperimentConfig,
    finals: Vec<RadialField>,
}

fn finish(label: &str, cfg: &ExperimentConfig, result: Result<(RunSummary, Vec<RadialField>)>) -> Finished {
    let base = RunRecord {
        label: label.to_string(),
        scenario: cfg.scenario,
        seed: cfg.seed,
        exit_code: 0,
        checks_passed: 0,
        checks_total: 0,
        error: None,
        metrics: BTreeMap::new(),
    };
    match result {
        Ok((summary, finals)) => Finished {
            record: RunRecord {
                exit_code: summary.exit_status().code(),
                checks_passed: summary.checks.iter().filter(|c| c.passed).count(),
                checks_total: summary.checks.len(),
                metrics: summary.metrics,
                ..base
            },
            config: cfg.clone(),
            finals,
        },
        Err(e) => Finished {
            record: RunRecord { exit_code: ExitStatus::for_error(&e).code(), error: Some(e.to_string()), ..base },
            config: cfg.clone(),
            finals: Vec::new(),
        },
    }
}

fn config_value(cfg: &ExperimentConfig, key: &str) -> Option<f64> {
    serde_json::to_value(cfg).ok()?.get(key)?.as_f64()
}

fn evaluate_fit(fit: &PlannedFit, done: &[Finished]) -> Result<f64> {
    let runs: Vec<&Finished> = fit
        .runs
        .iter()
        .map(|l| done.iter().find(|f| &f.record.label == l).expect("labels checked at parse time"))
        .collect();
    if let Some(bad) = runs.iter().find(|r| r.record.error.is_some()) {
        return Err(Error::InvalidParameter(format!("run '{}' failed", bad.record.label)));
    }
    match fit.kind {
        FitKind::SelfConvergence => {
            if runs.len() != 3 {
                return Err(Error::InvalidParameter("self_convergence needs exactly three runs".into()));
            }
            let field = |r: &Finished| {
                r.finals.first().cloned().ok_or_else(|| Error::InvalidParameter(format!("run '{}' kept no field", r.record.label)))
            };
            let (a, b, c) = (field(runs[0])?, field(runs[1])?, field(runs[2])?);
            let e1 = a.sub(&b)?.h2_norm();
            let e2 = b.sub(&c)?.h2_norm();
            Ok(self_convergence_order(e1, e2, fit.factor))
        }
        FitKind::PowerLaw => {
            let metric = fit.metric.as_deref().unwrap_or_default();
            let against = fit.against.as_deref().unwrap_or_default();
            let mut x = Vec::new();
            let mut y = Vec::new();
            for r in &runs {
                let xv = config_value(&r.config, against)
                    .or_else(|| r.record.metrics.get(against).copied())
                    .ok_or_else(|| Error::InvalidParameter(format!("'{against}' missing for run '{}'", r.record.label)))?;
                let yv = r
                    .record
                    .metrics
                    .get(metric)
                    .copied()
                    .ok_or_else(|| Error::InvalidParameter(format!("metric '{metric}' missing for run '{}'", r.record.label)))?;
                x.push(xv);
                y.push(yv);
            }
            Ok(log_slope(&x, &y))
        }
    }
}

/// Runs every planned configuration under `out/<label>/` and writes `sweep.json` and `sweep.csv`.
pub fn sweep(plan: &SweepPlan, out: &Path) -> Result<SweepReport> {
    let configs = plan.configs()?;
    let mut dir = OutputDir::create(out)?;
    let done: Vec<Finished> = configs
        .par_iter()
        .map(|(label, cfg)| {
            let result = run(cfg, &out.join(label)).map(|o| (o.summary, o.finals));
            finish(label, cfg, result)
        })
        .collect();
    let fits = plan
        .fit
        .iter()
        .map(|f| {
            let v = evaluate_fit(f, &done);
            FitRecord {
                kind: f.kind,
                runs: f.runs.clone(),
                value: v.as_ref().ok().copied(),
                error: v.err().map(|e| e.to_string()),
            }
        })
        .collect();
    let runs: Vec<RunRecord> = done.into_iter().map(|f| f.record).collect();
    let report = SweepReport {
        schema: SWEEP_SCHEMA.into(),
        failed_runs: runs.iter().filter(|r| r.exit_code != 0).count(),
        runs,
        fits,
    };
    let json = serde_json::to_vec_pretty(&report).map_err(|e| Error::Output(e.to_string()))?;
    dir.write("sweep.json", &json)?;
    dir.write("sweep.csv", &sweep_csv(&report)?)?;
    Ok(report)
}

fn sweep_csv(report: &SweepReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(["kind", "label", "scenario", "seed", "exit_code", "checks_passed", "checks_total", "value", "error"])
        .map_err(err)?;
    for r in &report.runs {
        w.write_record([
            "run",
            &r.label,
            r.scenario.name(),
            &r.seed.to_string(),
            &r.exit_code.to_string(),
            &r.checks_passed.to_string(),
            &r.checks_total.to_string(),
            "",
            r.error.as_deref().unwrap_or(""),
        ])
        .map_err(err)?;
    }
    for f in &report.fits {
        let kind = match f.kind {
            FitKind::SelfConvergence => "self_convergence",
            FitKind::PowerLaw => "power_law",
        };
        w.write_record([
            kind,
            &f.runs.join(" "),
            "",
            "",
            "",
            "",
            "",
            &f.value.map(|v| format!("{v:.16e}")).unwrap_or_default(),
            f.error.as_deref().unwrap_or(""),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Output(e.to_string()))
}
