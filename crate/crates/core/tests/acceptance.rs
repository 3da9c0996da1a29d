//! Runs the acceptance scenarios with their default configurations and prints one line per criterion.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use bhnls::harness::config::{ExperimentConfig, Scenario};
use bhnls::harness::{run, Check};

const SCENARIOS: [Scenario; 5] = [
    Scenario::StationaryGroundState,
    Scenario::TrappedRandom,
    Scenario::VirialAudit,
    Scenario::SmallDataScattering,
    Scenario::LpSuite,
];

const CRITERIA: [(u8, &str); 10] = [
    (1, "ground-state identities and elliptic residual"),
    (2, "trapping bounds along random trapped runs"),
    (3, "conservation and second-order splitting"),
    (4, "stationarity of the ground state"),
    (5, "localized virial inequality and mass rate"),
    (6, "coercive lower bound and bounded virial functional"),
    (7, "Bernstein and refined Sobolev ratios"),
    (8, "asymptotic orthogonality of diverging profiles"),
    (9, "small-data scattering size"),
    (10, "seeded determinism"),
];

fn main() -> ExitCode {
    let mut by_criterion: BTreeMap<u8, Vec<(Scenario, Check)>> = BTreeMap::new();
    let mut errors = Vec::new();
    for scenario in SCENARIOS {
        let start = Instant::now();
        let cfg = ExperimentConfig::defaults(scenario);
        let dir = tempfile::tempdir().expect("temporary directory");
        match run(&cfg, dir.path()) {
            Ok(outcome) => {
                for check in outcome.summary.checks {
                    if let Some(c) = check.criterion {
                        by_criterion.entry(c).or_default().push((scenario, check));
                    }
                }
                for g in &outcome.summary.guard_events {
                    errors.push(format!("{scenario}: guard {g}"));
                }
            }
            Err(e) => errors.push(format!("{scenario}: {e}")),
        }
        eprintln!("ran {scenario} in {:.1} s", start.elapsed().as_secs_f64());
    }

    let mut all = errors.is_empty();
    for (c, title) in CRITERIA {
        let checks = by_criterion.get(&c).map(Vec::as_slice).unwrap_or(&[]);
        let passed = !checks.is_empty() && checks.iter().all(|(_, k)| k.passed);
        all &= passed;
        println!(
            "criterion {c:>2} {}: {title} ({} of {} checks)",
            if passed { "PASS" } else { "FAIL" },
            checks.iter().filter(|(_, k)| k.passed).count(),
            checks.len()
        );
        for (s, k) in checks.iter().filter(|(_, k)| !k.passed) {
            println!("    {s}/{}: measured {:.4e}, threshold {:.4e}; {}", k.name, k.measured, k.threshold, k.detail);
        }
    }
    for e in &errors {
        println!("error: {e}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
