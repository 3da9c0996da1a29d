use std::path::Path;
use std::process::{Command, Output};

const QUICK: [&str; 8] = ["--set", "n=199", "--set", "r_max=32", "--set", "t_final=0.1", "--set", "acceptance_checks=false"];

fn bhnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhnls")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run_args<'a>(scenario: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut a = vec!["run", "--scenario", scenario, "--out", out, "--seed", "3"];
    a.extend_from_slice(&QUICK);
    a.extend_from_slice(extra);
    a
}

#[test]
fn quick_run_succeeds_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bhnls(&run_args("small_data_scattering", out, &[]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS")));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(out).join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 3);
    assert_eq!(summary["schema"], "bhnls.run-summary/1");
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "dt = 5e-3\n").unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let mut args = run_args("small_data_scattering", out, &[]);
    args.extend(["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&bhnls(&args)), 0);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(Path::new(out).join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["dt"], 5e-3);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&bhnls(&run_args("no_such_scenario", out, &[]))), 2);
    assert_eq!(code(&bhnls(&run_args("small_data_scattering", out, &["--set", "bogus=1"]))), 2);
    assert_eq!(code(&bhnls(&run_args("small_data_scattering", out, &["--set", "d=3"]))), 2);
    assert_eq!(code(&bhnls(&run_args("small_data_scattering", out, &["--config", "/nonexistent.toml"]))), 2);
    assert_eq!(code(&bhnls(&["run", "--scenario", "lp_suite"])), 2);
    assert_eq!(code(&bhnls(&["sweep", "--plan", "/nonexistent.toml", "--out", out])), 2);
}

#[test]
fn guard_trip_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bhnls(&run_args("small_data_scattering", out, &["--set", "guard_energy_drift=1e-300"]));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("GUARD"));
}

#[test]
fn empty_sweep_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    std::fs::write(&plan, "").unwrap();
    let out = dir.path().join("sweep");
    let o = bhnls(&["sweep", "--plan", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 0);
}

#[test]
fn failing_fit_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.toml");
    std::fs::write(
        &plan,
        "[[run]]\nscenario = \"small_data_scattering\"\nlabel = \"a\"\n\
         set = { n = 199, r_max = 32.0, t_final = 0.1, acceptance_checks = false }\n\
         [[fit]]\nkind = \"self_convergence\"\nruns = [\"a\"]\n",
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = bhnls(&["sweep", "--plan", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
}
