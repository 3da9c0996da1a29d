//! The scenario pipelines: grid, basis, initial data, evolution, diagnostics and checks.

use std::sync::Arc;
use std::time::Instant;

use crate::diagnostics::{DiagnosticsRecord, DiagnosticsSpec};
use crate::error::{Error, Result};
use crate::frequency::{
    derivative_bernstein, project_coeffs, refined_sobolev_check, shell_bernstein, DyadicLadder, MultiplierKind,
    Projection,
};
use crate::grid::{radial_laplacian, Grid, RadialField, SpectralBasis, C64};
use crate::ground_state::{
    elliptic_residual, eval_w, eval_w_windowed, sharp_constants, GroundStateParams, TrappingThresholds,
};
use crate::propagator::{evolve, evolve_observed, stability_experiment, GuardKind, Guards, SolverConfig, Trajectory};
use crate::symmetry::{decoupling_check, kinetic_decoupling_check, EnlargedElement, GroupElement};

use super::config::{ExperimentConfig, Scenario};
use super::data::{band_limited_noise, gaussian, middle_band, random_mixture, MixtureSpec};
use super::fit::{log_slope, self_convergence_order};
use super::output::{diagnostic_charts, labelled_csv, table_csv, timeseries_csv, virial_csv, OutputDir};
use super::{Check, ScenarioResult};

pub fn execute(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    match cfg.scenario {
        Scenario::StationaryGroundState => stationary_ground_state(cfg, out),
        Scenario::SmallDataScattering => small_data_scattering(cfg, out),
        Scenario::TrappedRandom => trapped_random(cfg, out),
        Scenario::AboveThresholdDemo => above_threshold_demo(cfg, out),
        Scenario::StabilityPerturbation => stability_perturbation(cfg, out),
        Scenario::LinearDispersion => linear_dispersion(cfg, out),
        Scenario::VirialAudit => virial_audit(cfg, out),
        Scenario::LpSuite => lp_suite(cfg, out),
    }
}

fn solver(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        dt: cfg.dt,
        t_final: cfg.t_final,
        guards: Guards {
            energy_drift: cfg.guard_energy_drift,
            boundary_tail: cfg.guard_boundary_tail,
            overflow: cfg.guard_overflow,
            concentration: cfg.guard_concentration,
        },
        snapshot_every: cfg.snapshot_every,
        diagnostics: DiagnosticsSpec { radii: cfg.radii.clone(), eta: cfg.eta },
        nonlinear: cfg.nonlinear,
    }
}

fn setup(d: usize, r_max: f64, n: usize) -> Result<(Arc<Grid>, SpectralBasis)> {
    let grid = Grid::build(d, r_max, n)?;
    let basis = radial_laplacian(&grid)?;
    Ok((grid, basis))
}

fn mixture(cfg: &ExperimentConfig) -> MixtureSpec {
    MixtureSpec {
        terms: cfg.mixture_terms,
        width_min: cfg.width_min,
        width_max: cfg.width_max,
        chirp: cfg.chirp,
        kinetic_min: cfg.kinetic_fraction_min,
        kinetic_max: cfg.kinetic_fraction_max,
    }
}

fn ground_state_field(cfg: &ExperimentConfig, grid: &Arc<Grid>) -> Result<RadialField> {
    let p = GroundStateParams::new(cfg.d, 0.0, cfg.w_lambda)?;
    let w = if cfg.w_window > 0.0 { eval_w_windowed(&p, grid, cfg.w_window * grid.r_max())? } else { eval_w(&p, grid)? };
    Ok(w.scale_real(cfg.w_amplitude))
}

fn relative_drift(recs: &[DiagnosticsRecord], get: fn(&DiagnosticsRecord) -> f64) -> f64 {
    let x0 = get(&recs[0]);
    let scale = x0.abs().max(f64::MIN_POSITIVE);
    recs.iter().map(|r| (get(r) - x0).abs() / scale).fold(0.0, f64::max)
}

fn guard_text(label: &str, traj: &Trajectory) -> Option<String> {
    traj.guard.map(|g| {
        format!(
            "{label}: {} at step {} (t = {:.6}): {:.6e} > {:.6e}",
            g.kind.label(),
            g.step,
            g.t,
            g.value,
            g.limit
        )
    })
}

/// Writes `timeseries.csv` and `virial.csv` under `dir` and returns the time-series bytes.
fn write_trajectory(out: &mut OutputDir, dir: &str, traj: &Trajectory, radii: &[f64]) -> Result<Vec<u8>> {
    let ts = timeseries_csv(&traj.diagnostics, radii)?;
    out.write(&format!("{dir}timeseries.csv"), &ts)?;
    out.write(&format!("{dir}virial.csv"), &virial_csv(&traj.diagnostics, radii)?)?;
    Ok(ts)
}

/// Guard, energy and mass checks over a set of acceptance trajectories.
fn conservation_checks(res: &mut ScenarioResult, runs: &[(String, &Trajectory)], guard_criterion: u8) {
    let mut tripped = 0;
    let (mut energy, mut mass) = (0.0f64, 0.0f64);
    let (mut worst_e, mut worst_m) = (String::new(), String::new());
    for (label, traj) in runs {
        if let Some(msg) = guard_text(label, traj) {
            res.guard_events.push(msg);
            tripped += 1;
            continue;
        }
        let e = relative_drift(&traj.diagnostics, |r| r.energy);
        let m = relative_drift(&traj.diagnostics, |r| r.mass);
        if e >= energy {
            energy = e;
            worst_e = label.clone();
        }
        if m >= mass {
            mass = m;
            worst_m = label.clone();
        }
    }
    res.metrics.insert("energy_drift".into(), energy);
    res.metrics.insert("mass_drift".into(), mass);
    res.checks.push(Check::at_most(
        "guard_free",
        Some(guard_criterion),
        tripped as f64,
        0.0,
        format!("{tripped} of {} runs tripped a guard", runs.len()),
    ));
    res.checks.push(Check::at_most("energy_drift", Some(3), energy, 1e-6, format!("largest relative drift, run {worst_e}")));
    res.checks.push(Check::at_most("mass_drift", Some(3), mass, 1e-8, format!("largest relative drift, run {worst_m}")));
}

fn list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn centered_rate(series: &[f64], dt: f64) -> Vec<f64> {
    series.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)).collect()
}

fn stationary_ground_state(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let u0 = ground_state_field(cfg, &grid)?;
    let norm0 = u0.h2_norm();
    let sc = solver(cfg);
    let deviation_run = |u0: &RadialField, sc: &SolverConfig, basis: &SpectralBasis| -> Result<(Trajectory, Vec<(f64, f64)>)> {
        let norm0 = u0.h2_norm();
        let mut dev = Vec::new();
        let traj = evolve_observed(u0, sc, basis, |_, t, u| {
            dev.push((t, u.sub(u0).expect("shared grid").h2_norm() / norm0));
        })?;
        Ok((traj, dev))
    };
    let (main, dev_main) = deviation_run(&u0, &sc, &basis)?;
    write_trajectory(out, "", &main, &cfg.radii)?;
    diagnostic_charts(out, "", &[(format!("dt = {}", cfg.dt), &main.diagnostics)], &cfg.radii, 0)?;
    res.finals.push(main.final_field.clone());
    let max_dev = dev_main.iter().map(|p| p.1).fold(0.0, f64::max);
    res.metrics.insert("h2_deviation".into(), max_dev);
    if !cfg.acceptance_checks {
        if let Some(msg) = guard_text("main", &main) {
            res.guard_events.push(msg);
        }
        return Ok(res);
    }

    let mut half_cfg = sc.clone();
    half_cfg.dt = cfg.dt / 2.0;
    let mut quarter_cfg = sc.clone();
    quarter_cfg.dt = cfg.dt / 4.0;
    let half = evolve(&u0, &half_cfg, &basis)?;
    let (quarter, dev_quarter) = deviation_run(&u0, &quarter_cfg, &basis)?;
    let (coarse_grid, coarse_basis) = setup(cfg.d, cfg.r_max, cfg.coarse_n)?;
    let coarse_u0 = ground_state_field(cfg, &coarse_grid)?;
    let (coarse, dev_coarse) = deviation_run(&coarse_u0, &quarter_cfg, &coarse_basis)?;

    let diff = |a: &Trajectory, b: &Trajectory| -> Result<f64> { Ok(a.final_field.sub(&b.final_field)?.h2_norm() / norm0) };
    let e1 = diff(&main, &half)?;
    let e2 = diff(&half, &quarter)?;
    let order = self_convergence_order(e1, e2, 2.0);
    res.metrics.insert("strang_order".into(), order);
    res.metrics.insert("self_difference_dt".into(), e1);
    res.metrics.insert("self_difference_dt_half".into(), e2);
    res.checks.push(Check::new(
        "strang_order",
        Some(3),
        (order - 2.0).abs() <= 0.3,
        order,
        2.0,
        format!("self-differences {e1:.4e}, {e2:.4e} under dt halving; admissible 2 ± 0.3"),
    ));
    out.write(
        "convergence.csv",
        &table_csv(&["dt", "self_difference"], &[vec![cfg.dt, e1], vec![cfg.dt / 2.0, e2]])?,
    )?;

    let peak = |dev: &[(f64, f64)]| dev.iter().map(|p| p.1).fold(0.0, f64::max);
    let (dev_f, dev_c) = (peak(&dev_quarter), peak(&dev_coarse));
    let (h_f, h_c) = (grid.h(), coarse_grid.h());
    let c_t = e1 / (0.75 * cfg.dt * cfg.dt);
    let c_h = (dev_c - dev_f).abs() / (h_c - h_f);
    let envelope = 3.0 * (c_t * cfg.dt * cfg.dt + c_h * h_f);
    res.metrics.insert("envelope_time_constant".into(), c_t);
    res.metrics.insert("envelope_space_constant".into(), c_h);
    res.checks.push(Check::at_most(
        "stationarity_envelope",
        Some(4),
        max_dev,
        envelope,
        format!("sup relative H2 deviation against 3(C_t dt^2 + C_h h), C_t = {c_t:.4e}, C_h = {c_h:.4e}"),
    ));
    out.line_chart(
        "deviation.svg",
        "relative H2 deviation from the initial state",
        "t",
        &[
            (format!("dt = {}", cfg.dt), dev_main.clone()),
            (format!("dt = {}", cfg.dt / 4.0), dev_quarter.clone()),
            (format!("n = {}, dt = {}", cfg.coarse_n, cfg.dt / 4.0), dev_coarse.clone()),
        ],
    )?;
    let rows: Vec<Vec<f64>> = dev_main.iter().map(|&(t, v)| vec![t, v]).collect();
    out.write("deviation.csv", &table_csv(&["t", "h2_deviation"], &rows)?)?;

    conservation_checks(
        &mut res,
        &[
            ("main".into(), &main),
            ("dt/2".into(), &half),
            ("dt/4".into(), &quarter),
            ("coarse".into(), &coarse),
        ],
        4,
    );
    ground_state_identities(cfg, out, &mut res)?;
    Ok(res)
}

fn ground_state_identities(cfg: &ExperimentConfig, out: &mut OutputDir, res: &mut ScenarioResult) -> Result<()> {
    let mut table = Vec::new();
    let mut residual_rows = Vec::new();
    for &d in &cfg.identity_dims {
        let start = Instant::now();
        let grid = Grid::build(d, cfg.identity_r_max, cfg.identity_n)?;
        let consts = match sharp_constants(d, &grid) {
            Ok(c) => Some(c),
            Err(Error::ResolutionInsufficient(msg)) => {
                res.checks.push(Check::new(&format!("ground_state_resolution_d{d}"), Some(1), false, f64::NAN, 0.0, msg));
                None
            }
            Err(e) => return Err(e),
        };
        let mut hs = Vec::new();
        let mut residuals = Vec::new();
        for n in [cfg.identity_n / 4, cfg.identity_n / 2, cfg.identity_n] {
            let g = Grid::build(d, cfg.identity_r_max, n)?;
            let p = GroundStateParams::unit(d);
            let r = elliptic_residual(&eval_w(&p, &g)?, &p)?;
            hs.push(g.h());
            residuals.push(r);
            residual_rows.push(vec![d as f64, g.h(), r]);
        }
        let elapsed = start.elapsed().as_secs_f64();
        let order = log_slope(&hs, &residuals);
        let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
        res.metrics.insert(format!("residual_order_d{d}"), order);
        res.checks.push(Check::new(
            &format!("residual_order_d{d}"),
            Some(1),
            decreasing && order >= 1.0,
            order,
            1.0,
            format!("residuals {} at h {}", list(&residuals), list(&hs)),
        ));
        res.checks.push(Check::at_most(
            &format!("identity_runtime_d{d}"),
            Some(1),
            elapsed,
            120.0,
            "seconds for the constants and the residual triple".into(),
        ));
        if let Some(c) = consts {
            let kp = (c.kin_w / c.potential_w - 1.0).abs();
            let er = (c.e_w / c.kin_w / (2.0 / d as f64) - 1.0).abs();
            res.metrics.insert(format!("kinetic_w_d{d}"), c.kin_w);
            res.metrics.insert(format!("potential_w_d{d}"), c.potential_w);
            res.metrics.insert(format!("energy_w_d{d}"), c.e_w);
            res.checks.push(Check::at_most(
                &format!("kinetic_equals_potential_d{d}"),
                Some(1),
                kp,
                5e-3,
                format!("kinetic {:.8e}, potential {:.8e}", c.kin_w, c.potential_w),
            ));
            res.checks.push(Check::at_most(
                &format!("energy_ratio_d{d}"),
                Some(1),
                er,
                5e-3,
                format!("E(W)/kinetic = {:.8} against 2/d", c.e_w / c.kin_w),
            ));
            table.push(vec![d as f64, c.kin_w, c.potential_w, c.e_w, c.y_c, c.cd]);
        }
    }
    out.write("identities.csv", &table_csv(&["d", "kinetic", "potential", "energy", "y_c", "c_d"], &table)?)?;
    out.write("residuals.csv", &table_csv(&["d", "h", "residual"], &residual_rows)?)?;
    Ok(())
}

fn trapped_random(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let start = Instant::now();
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let consts = sharp_constants(cfg.d, &grid)?;
    let th = TrappingThresholds::new(&consts, cfg.delta0)?;
    let spec = mixture(cfg);
    let sc = solver(cfg);
    res.metrics.insert("delta_bar".into(), th.delta_bar);
    res.metrics.insert("coercivity".into(), th.coercivity);

    let mut trajectories = Vec::new();
    let mut rows = Vec::new();
    let mut first_csv = None;
    let (mut a_priori_failures, mut violations) = (0usize, 0usize);
    let mut worst = [f64::INFINITY; 3];
    for k in 0..cfg.runs {
        let seed = cfg.seed + k as u64;
        let u0 = random_mixture(&grid, seed, &spec, consts.kin_w)?;
        let traj = evolve(&u0, &sc, &basis)?;
        let r0 = &traj.diagnostics[0];
        let met = th.hypotheses(r0.kinetic, r0.energy);
        let a_priori = met && r0.kinetic <= cfg.kinetic_ceiling * consts.kin_w && r0.energy <= (1.0 - cfg.delta0) * consts.e_w;
        if !a_priori {
            a_priori_failures += 1;
        }
        let mut margins = [f64::INFINITY; 3];
        for r in &traj.diagnostics {
            let rep = th.evaluate(r.kinetic, r.potential, r.energy, met);
            if !rep.all_hold() {
                violations += 1;
            }
            margins[0] = margins[0].min(rep.kinetic_margin / consts.kin_w);
            margins[1] = margins[1].min(rep.coercive_margin / r0.kinetic);
            margins[2] = margins[2].min(rep.energy_margin / consts.e_w);
        }
        for (w, m) in worst.iter_mut().zip(margins) {
            *w = w.min(m);
        }
        rows.push(vec![
            seed as f64,
            r0.kinetic / consts.kin_w,
            r0.energy / consts.e_w,
            margins[0],
            margins[1],
            margins[2],
        ]);
        let csv = write_trajectory(out, &format!("runs/seed_{seed}/"), &traj, &cfg.radii)?;
        if first_csv.is_none() {
            first_csv = Some(csv);
        }
        trajectories.push((format!("seed {seed}"), traj));
    }
    out.write(
        "trapping.csv",
        &table_csv(
            &["seed", "kinetic_fraction", "energy_fraction", "kinetic_margin", "coercive_margin", "energy_margin"],
            &rows,
        )?,
    )?;
    let charts: Vec<(String, &[DiagnosticsRecord])> =
        trajectories.iter().map(|(l, t)| (l.clone(), t.diagnostics.as_slice())).collect();
    diagnostic_charts(out, "", &charts, &cfg.radii, 0)?;

    res.metrics.insert("min_kinetic_margin".into(), worst[0]);
    res.metrics.insert("min_coercive_margin".into(), worst[1]);
    res.metrics.insert("min_energy_margin".into(), worst[2]);
    res.checks.push(Check::at_most(
        "trapped_hypotheses",
        Some(2),
        a_priori_failures as f64,
        0.0,
        format!(
            "runs violating kinetic <= {} kinetic(W) or E <= {} E(W) initially",
            cfg.kinetic_ceiling,
            1.0 - cfg.delta0
        ),
    ));
    res.checks.push(Check::at_most(
        "trapping_violations",
        Some(2),
        violations as f64,
        0.0,
        format!("time levels breaking a trapping inequality; delta_bar = {:.6}", th.delta_bar),
    ));
    let runs: Vec<(String, &Trajectory)> = trajectories.iter().map(|(l, t)| (l.clone(), t)).collect();
    conservation_checks(&mut res, &runs, 2);
    res.finals.extend(trajectories.iter().map(|(_, t)| t.final_field.clone()));

    let u0 = random_mixture(&grid, cfg.seed, &spec, consts.kin_w)?;
    let again = timeseries_csv(&evolve(&u0, &sc, &basis)?.diagnostics, &cfg.radii)?;
    let same = first_csv.as_deref() == Some(again.as_slice());
    res.checks.push(Check::new(
        "determinism",
        Some(10),
        same,
        if same { 0.0 } else { 1.0 },
        0.0,
        format!("time series of seed {} regenerated and compared byte by byte", cfg.seed),
    ));
    res.checks.push(Check::at_most(
        "trapped_runtime",
        Some(2),
        start.elapsed().as_secs_f64(),
        600.0,
        "seconds for all runs".into(),
    ));
    Ok(res)
}

/// Per-run virial statistics.
struct VirialRun {
    seed: u64,
    radii: Vec<usize>,
    inequality_fraction: f64,
    mass_rate_error: f64,
    coercive_fraction: f64,
    z_ratio: f64,
}

/// Radii whose kinetic tail stays below the threshold along the whole run.
fn admissible_radii(cfg: &ExperimentConfig, traj: &Trajectory, r_max: f64) -> Vec<usize> {
    (0..cfg.radii.len())
        .filter(|&k| {
            2.0 * cfg.radii[k] <= r_max
                && traj.diagnostics.iter().all(|r| r.tail_fraction(k) < cfg.tail_threshold)
        })
        .collect()
}

/// `(main − allowance − FD z') / budget` at every interior step and radius `k`.
fn virial_shortfalls(traj: &Trajectory, k: usize, h: f64, dt: f64) -> Vec<(f64, f64, f64)> {
    let recs = &traj.diagnostics;
    let z: Vec<f64> = recs.iter().map(|r| r.virial_z[k]).collect();
    centered_rate(&z, dt)
        .into_iter()
        .enumerate()
        .map(|(i, fd)| {
            let r = &recs[i + 1];
            let allowance = (h * r.n_t).powi(2) * r.virial_main[k].abs();
            (r.virial_main[k] - allowance - fd, r.virial_budget[k], fd)
        })
        .collect()
}

fn virial_audit(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let consts = sharp_constants(cfg.d, &grid)?;
    let th = TrappingThresholds::new(&consts, cfg.delta0)?;
    let spec = mixture(cfg);
    let sc = solver(cfg);
    let h = grid.h();

    let cal_seed = cfg.seed + cfg.calibration_seed_offset;
    let cal = evolve(&random_mixture(&grid, cal_seed, &spec, consts.kin_w)?, &sc, &basis)?;
    let mut kappa: f64 = 1.0;
    for k in admissible_radii(cfg, &cal, grid.r_max()) {
        for (gap, budget, _) in virial_shortfalls(&cal, k, h, cfg.dt) {
            if budget > 0.0 {
                kappa = kappa.max(gap / budget);
            }
        }
    }
    res.metrics.insert("kappa".into(), kappa);
    res.metrics.insert("delta_bar".into(), th.delta_bar);

    let mut stats = Vec::new();
    let mut trajectories = Vec::new();
    for k in 0..cfg.runs {
        let seed = cfg.seed + k as u64;
        let u0 = random_mixture(&grid, seed, &spec, consts.kin_w)?;
        let grad = u0.gradient();
        let grad_norm = grid.sum(&grad.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()).sqrt();
        let traj = evolve(&u0, &sc, &basis)?;
        write_trajectory(out, &format!("runs/seed_{seed}/"), &traj, &cfg.radii)?;
        let radii = admissible_radii(cfg, &traj, grid.r_max());

        let (mut held, mut total) = (0usize, 0usize);
        for &kr in &radii {
            for (gap, budget, _) in virial_shortfalls(&traj, kr, h, cfg.dt) {
                total += 1;
                if gap <= kappa * budget {
                    held += 1;
                }
            }
        }
        let inequality_fraction = if total > 0 { held as f64 / total as f64 } else { 0.0 };

        let mut rates = Vec::new();
        for kr in 0..cfg.radii.len() {
            let m: Vec<f64> = traj.diagnostics.iter().map(|r| r.localized_mass[kr]).collect();
            for (i, fd) in centered_rate(&m, cfg.dt).into_iter().enumerate() {
                rates.push((fd, traj.diagnostics[i + 1].localized_mass_rate[kr]));
            }
        }
        let floor = cfg.mass_rate_floor * rates.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
        let mass_rate_error = rates
            .iter()
            .filter(|p| p.0.abs() > floor)
            .map(|(fd, id)| (id - fd).abs() / fd.abs())
            .fold(0.0, f64::max);

        let k0 = traj.diagnostics[0].kinetic;
        let m0 = traj.diagnostics[0].mass;
        let (coercive_fraction, z_ratio) = match radii.first() {
            Some(&kr) => {
                let target = cfg.coercivity_factor * th.delta_bar * k0;
                let fds = virial_shortfalls(&traj, kr, h, cfg.dt);
                let above = fds.iter().filter(|p| p.2 >= target).count();
                let envelope = 2.0 * cfg.radii[kr] * m0.sqrt() * grad_norm;
                let z_max = traj.diagnostics.iter().map(|r| r.virial_z[kr].abs()).fold(0.0, f64::max);
                (above as f64 / fds.len().max(1) as f64, z_max / envelope)
            }
            None => (0.0, f64::INFINITY),
        };
        stats.push(VirialRun { seed, radii, inequality_fraction, mass_rate_error, coercive_fraction, z_ratio });
        trajectories.push((format!("seed {seed}"), traj));
    }

    let rows: Vec<Vec<f64>> = stats
        .iter()
        .map(|s| {
            vec![
                s.seed as f64,
                s.radii.first().map(|&k| cfg.radii[k]).unwrap_or(f64::NAN),
                s.radii.len() as f64,
                s.inequality_fraction,
                s.mass_rate_error,
                s.coercive_fraction,
                s.z_ratio,
            ]
        })
        .collect();
    out.write(
        "virial_summary.csv",
        &table_csv(
            &["seed", "radius", "admissible_radii", "inequality_fraction", "mass_rate_error", "coercive_fraction", "z_ratio"],
            &rows,
        )?,
    )?;
    let charts: Vec<(String, &[DiagnosticsRecord])> =
        trajectories.iter().map(|(l, t)| (l.clone(), t.diagnostics.as_slice())).collect();
    let chart_radius = stats.first().and_then(|s| s.radii.first().copied()).unwrap_or(0);
    diagnostic_charts(out, "", &charts, &cfg.radii, chart_radius)?;

    let min = |f: fn(&VirialRun) -> f64| stats.iter().map(f).fold(f64::INFINITY, f64::min);
    let max = |f: fn(&VirialRun) -> f64| stats.iter().map(f).fold(0.0, f64::max);
    res.checks.push(Check::at_least(
        "virial_inequality",
        Some(5),
        min(|s| s.inequality_fraction),
        cfg.virial_fraction,
        format!("smallest fraction of interior steps with FD z' >= main - kappa budget, kappa = {kappa:.4}"),
    ));
    res.checks.push(Check::at_most(
        "mass_rate_identity",
        Some(5),
        max(|s| s.mass_rate_error),
        cfg.mass_rate_tolerance,
        format!("largest relative mismatch where |FD| > {} of its run maximum", cfg.mass_rate_floor),
    ));
    res.checks.push(Check::at_least(
        "coercive_growth",
        Some(6),
        min(|s| s.coercive_fraction),
        cfg.coercivity_fraction,
        format!("smallest fraction of steps with FD z' >= {} delta_bar kinetic(u0)", cfg.coercivity_factor),
    ));
    res.checks.push(Check::at_most(
        "virial_z_bounded",
        Some(6),
        max(|s| s.z_ratio),
        cfg.z_envelope_factor,
        "largest sup|z_R| over 2R sqrt(M0) ||d_r u0||".into(),
    ));
    let runs: Vec<(String, &Trajectory)> = trajectories.iter().map(|(l, t)| (l.clone(), t)).collect();
    conservation_checks(&mut res, &runs, 5);
    res.finals.extend(trajectories.iter().map(|(_, t)| t.final_field.clone()));
    Ok(res)
}

fn small_data_scattering(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let sc = solver(cfg);
    let mut trajectories = Vec::new();
    for (k, &eps) in cfg.amplitudes.iter().enumerate() {
        let traj = evolve(&gaussian(&grid, cfg.gauss_width, eps)?, &sc, &basis)?;
        write_trajectory(out, &format!("runs/amplitude_{k}/"), &traj, &cfg.radii)?;
        trajectories.push((format!("amplitude {eps}"), eps, traj));
    }
    let q = crate::diagnostics::scattering_exponent(cfg.d);
    let mut rows = Vec::new();
    let mut worst: f64 = 1.0;
    for (_, eps, traj) in &trajectories {
        let s = traj.diagnostics.last().map(|r| r.s_accum).unwrap_or(0.0);
        rows.push(vec![*eps, s]);
    }
    for w in rows.windows(2) {
        let expected = (w[1][0] / w[0][0]).powf(q);
        let measured = w[1][1] / w[0][1];
        let off = (measured / expected).max(expected / measured);
        worst = if off.is_finite() { worst.max(off) } else { f64::INFINITY };
    }
    out.write("scattering.csv", &table_csv(&["amplitude", "S_total"], &rows)?)?;
    let charts: Vec<(String, &[DiagnosticsRecord])> =
        trajectories.iter().map(|(l, _, t)| (l.clone(), t.diagnostics.as_slice())).collect();
    diagnostic_charts(out, "", &charts, &cfg.radii, 0)?;
    res.metrics.insert("scattering_ratio_deviation".into(), worst);
    if let Some(first) = rows.first() {
        res.metrics.insert("amplitude".into(), first[0]);
        res.metrics.insert("s_total".into(), first[1]);
    }
    res.checks.push(Check::at_most(
        "scattering_power_law",
        Some(9),
        worst,
        2.0,
        format!("largest factor between successive S ratios and the power law with exponent {q}"),
    ));
    let runs: Vec<(String, &Trajectory)> = trajectories.iter().map(|(l, _, t)| (l.clone(), t)).collect();
    conservation_checks(&mut res, &runs, 9);
    res.finals.extend(trajectories.iter().map(|(_, _, t)| t.final_field.clone()));
    Ok(res)
}

fn above_threshold_demo(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let u0 = ground_state_field(cfg, &grid)?;
    let traj = evolve(&u0, &solver(cfg), &basis)?;
    write_trajectory(out, "", &traj, &cfg.radii)?;
    diagnostic_charts(out, "", &[(format!("{} W", cfg.w_amplitude), &traj.diagnostics)], &cfg.radii, 0)?;
    if let Some(msg) = guard_text("demo", &traj) {
        res.guard_events.push(msg);
    }
    let kind = traj.guard.map(|g| g.kind);
    let kin: Vec<f64> = traj.diagnostics.iter().map(|r| r.kinetic).collect();
    let kinetic_growth = kin.iter().cloned().fold(0.0, f64::max) / kin[0];
    res.metrics.insert("kinetic_growth".into(), kinetic_growth);
    res.metrics.insert("concentration_reason".into(), if kind == Some(GuardKind::KineticConcentration) { 1.0 } else { 0.0 });
    res.checks.push(Check::new(
        "collapse_detected",
        None,
        kind.is_some() && kinetic_growth >= 1.5,
        traj.guard.map(|g| g.t).unwrap_or(f64::NAN),
        cfg.t_final,
        format!("guard: {}, kinetic growth {kinetic_growth:.3}", kind.map(|k| k.label()).unwrap_or("none")),
    ));
    let n: Vec<f64> = traj.diagnostics.iter().map(|r| r.n_t).collect();
    let growth = n[n.len() - 1] / n[0];
    res.metrics.insert("frequency_growth".into(), growth);
    res.checks.push(Check::at_least(
        "frequency_growth",
        None,
        growth,
        1.0,
        "final over initial frequency scale".into(),
    ));
    res.finals.push(traj.final_field);
    Ok(res)
}

fn stability_perturbation(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let sc = solver(cfg);
    let w = ground_state_field(cfg, &grid)?;
    let rep = stability_experiment(&w, &w.scale_real(cfg.perturbation), &sc, &basis)?;
    res.metrics.insert("ground_state_ratio".into(), rep.ratio);
    res.checks.push(Check::new(
        "perturbed_ground_state_guard_free",
        None,
        rep.base_guard.is_none() && rep.perturbed_guard.is_none(),
        rep.ratio,
        f64::NAN,
        format!("W and (1 + {})W over T = {}", cfg.perturbation, cfg.t_final),
    ));
    for (label, g) in [("base", rep.base_guard), ("perturbed", rep.perturbed_guard)] {
        if let Some(g) = g {
            res.guard_events.push(format!("{label}: {} at t = {:.6}", g.kind.label(), g.t));
        }
    }

    let base = w.scale_real(0.7);
    let bump = gaussian(&grid, cfg.gauss_width, 1.0)?;
    let size = cfg.perturbation.abs() * w.h2_norm() / bump.h2_norm();
    let mut rows = vec![vec![1.0 + cfg.perturbation, rep.initial_difference, rep.sup_difference]];
    let mut sups = Vec::new();
    for scale in [1.0, 0.5, 0.25] {
        let r = stability_experiment(&base, &bump.scale_real(size * scale), &sc, &basis)?;
        rows.push(vec![scale, r.initial_difference, r.sup_difference]);
        sups.push(r.sup_difference);
    }
    out.write("stability.csv", &table_csv(&["scale", "initial_difference", "sup_difference"], &rows)?)?;
    let series = vec![(
        "sup difference".to_string(),
        [1.0, 0.5, 0.25].iter().zip(&sups).map(|(&s, &v)| (s, v)).collect(),
    )];
    out.line_chart("stability.svg", "sup H2 difference against perturbation size", "scale", &series)?;
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    res.checks.push(Check::new(
        "difference_shrinks",
        None,
        decreasing,
        sups[sups.len() - 1] / sups[0],
        1.0,
        format!("sup differences {} for perturbation scales 1, 1/2, 1/4", list(&sups)),
    ));
    let traj = evolve(&w, &sc, &basis)?;
    write_trajectory(out, "", &traj, &cfg.radii)?;
    res.finals.push(traj.final_field);
    Ok(res)
}

fn linear_dispersion(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let amp = cfg.amplitudes.first().copied().unwrap_or(1.0);
    let traj = evolve(&gaussian(&grid, cfg.gauss_width, amp)?, &solver(cfg), &basis)?;
    write_trajectory(out, "", &traj, &cfg.radii)?;
    diagnostic_charts(out, "", &[("free flow".into(), &traj.diagnostics)], &cfg.radii, 0)?;
    if let Some(msg) = guard_text("demo", &traj) {
        res.guard_events.push(msg);
    }
    let s: Vec<f64> = traj.diagnostics.iter().map(|r| r.s_accum).collect();
    let total = s[s.len() - 1];
    let mid = s[s.len() / 2];
    let late_share = if total > 0.0 { (total - mid) / total } else { f64::NAN };
    res.metrics.insert("late_scattering_share".into(), late_share);
    res.checks.push(Check::at_most(
        "scattering_saturates",
        None,
        late_share,
        0.1,
        "share of the scattering size collected over the second half of the run".into(),
    ));
    res.checks.push(Check::new(
        "boundary_clean",
        None,
        traj.guard.is_none(),
        traj.guard.map(|g| g.value).unwrap_or(0.0),
        cfg.guard_boundary_tail,
        "no guard tripped over the run".into(),
    ));
    res.finals.push(traj.final_field);
    Ok(res)
}

/// The named fields of the frequency corpus.
pub fn corpus(cfg: &ExperimentConfig, grid: &Arc<Grid>, basis: &SpectralBasis) -> Result<Vec<(String, RadialField)>> {
    let d = cfg.d;
    let a = -(d as f64 - 4.0) / 2.0;
    let mut out = Vec::new();
    for w in [0.5, 0.75, 1.0, 1.5, 2.0, 3.0] {
        out.push((format!("gaussian width {w}"), gaussian(grid, w, 1.0)?));
    }
    for l in [0.5f64, 1.0, 2.0, 4.0] {
        let f = RadialField::from_real(grid.clone(), |r| l.powf(a) * (1.0 + (r / l).powi(2)).powi(-3))?;
        out.push((format!("rational rescaled {l}"), f));
    }
    for k in [0.1, 0.25, 0.5, 1.0] {
        let f = RadialField::from_fn(grid.clone(), |r| C64::from_polar((-r * r / 8.0).exp(), k * r * r))?;
        out.push((format!("chirped gaussian {k}"), f));
    }
    let (lo, hi) = middle_band(&DyadicLadder::for_basis(basis));
    for j in 0..10u64 {
        out.push((format!("noise {j}"), band_limited_noise(basis, cfg.seed + j, lo, hi)?));
    }
    for l in [0.5, 1.0, 2.0, 4.0] {
        let p = GroundStateParams::new(d, 0.0, l)?;
        out.push((format!("ground state {l}"), eval_w_windowed(&p, grid, cfg.w_window * grid.r_max())?));
    }
    let (spread, single) = spread_and_single(basis)?;
    out.push(("frequency spread".into(), spread));
    out.push(("single mode".into(), single));
    out.truncate(cfg.corpus_size);
    Ok(out)
}

/// `Σ_k 2^{−k} φ_{n_k}` over six consecutive interior octaves, and `φ_{n_0}` scaled to the same
/// kinetic energy.
fn spread_and_single(basis: &SpectralBasis) -> Result<(RadialField, RadialField)> {
    let ladder = DyadicLadder::for_basis(basis);
    let interior = ladder.interior();
    let freqs = basis.frequencies();
    let pick = |target: f64| {
        freqs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let mut c = vec![C64::new(0.0, 0.0); basis.len()];
    let octaves = interior.len().min(6);
    for k in 0..octaves {
        c[pick(0.75 * interior[k])] += C64::new(0.5f64.powi(k as i32), 0.0);
    }
    let spread = basis.reconstruct(&c)?;
    let single = basis.eigenfunction(pick(0.75 * interior[0]));
    let single = single.scale_real(spread.h2_norm() / single.h2_norm());
    Ok((spread, single))
}

const BERNSTEIN_PAIRS: [(f64, f64); 4] = [(1.0, 2.0), (2.0, 4.0), (2.0, f64::INFINITY), (1.0, f64::INFINITY)];

/// Shells carrying less than this share of `‖u‖₂` are left out of the Bernstein ratios.
const ACTIVE_SHELL: f64 = 1e-2;

fn lp_suite(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::default();
    let (grid, basis) = setup(cfg.d, cfg.r_max, cfg.n)?;
    let fields = corpus(cfg, &grid, &basis)?;
    let ladder = DyadicLadder::for_basis(&basis);
    let interior = ladder.interior().to_vec();

    let mut bern_rows = Vec::new();
    let mut extremes = vec![(f64::INFINITY, 0.0f64); BERNSTEIN_PAIRS.len()];
    let mut deriv = (f64::INFINITY, 0.0f64);
    let mut sobolev_rows = Vec::new();
    let mut sobolev_max: f64 = 0.0;
    for (name, u) in &fields {
        let c = basis.decompose(u)?;
        let l2 = u.lp_norm(2.0);
        for &n in &interior {
            let smooth = basis.reconstruct(&project_coeffs(&c, n, MultiplierKind::Smooth, Projection::Shell, &basis))?;
            if smooth.lp_norm(2.0) >= ACTIVE_SHELL * l2 {
                for (k, &(p, q)) in BERNSTEIN_PAIRS.iter().enumerate() {
                    let rep = shell_bernstein(&smooth, n, p, q);
                    extremes[k].0 = extremes[k].0.min(rep.ratio);
                    extremes[k].1 = extremes[k].1.max(rep.ratio);
                    bern_rows.push((name.clone(), vec![p, q, n, rep.ratio]));
                }
            }
            let sharp = basis.reconstruct(&project_coeffs(&c, n, MultiplierKind::Sharp, Projection::Shell, &basis))?;
            if sharp.lp_norm(2.0) >= ACTIVE_SHELL * l2 {
                let ratio = derivative_bernstein(u, n, &basis)?;
                deriv = (deriv.0.min(ratio), deriv.1.max(ratio));
            }
        }
        let s = refined_sobolev_check(u, &basis)?;
        sobolev_max = if s.is_finite() { sobolev_max.max(s) } else { f64::INFINITY };
        sobolev_rows.push((name.clone(), vec![s]));
    }
    out.write("bernstein.csv", &labelled_csv(&["field", "p", "q", "N", "ratio"], &bern_rows)?)?;
    out.write("sobolev.csv", &labelled_csv(&["field", "ratio"], &sobolev_rows)?)?;
    res.metrics.insert("corpus_size".into(), fields.len() as f64);

    for (k, &(p, q)) in BERNSTEIN_PAIRS.iter().enumerate() {
        let (lo, hi) = extremes[k];
        let spread = hi / lo;
        let tag = format!("p{p}_q{}", if q.is_infinite() { "inf".into() } else { q.to_string() });
        res.metrics.insert(format!("bernstein_constant_{tag}"), hi);
        if p < 2.0 {
            res.metrics.insert(format!("bernstein_spread_{tag}"), spread);
            continue;
        }
        res.checks.push(Check::at_most(
            &format!("bernstein_spread_{tag}"),
            Some(7),
            spread,
            50.0,
            format!("ratios in [{lo:.4e}, {hi:.4e}] over interior octaves"),
        ));
    }
    let pair_series: Vec<(String, Vec<(f64, f64)>)> = BERNSTEIN_PAIRS
        .iter()
        .map(|&(p, q)| {
            let pts = bern_rows
                .iter()
                .filter(|(_, r)| r[0] == p && r[1] == q)
                .map(|(_, r)| (r[2].log2(), r[3]))
                .collect();
            (format!("p = {p}, q = {q}"), pts)
        })
        .collect();
    out.line_chart("bernstein.svg", "Bernstein ratios over the corpus", "log2 N", &pair_series)?;

    res.checks.push(Check::new(
        "derivative_bernstein",
        Some(7),
        deriv.0 >= 0.2 && deriv.1 <= 5.0,
        deriv.1,
        5.0,
        format!("sharp-shell ratios in [{:.4}, {:.4}], admissible [0.2, 5]", deriv.0, deriv.1),
    ));
    res.metrics.insert("sobolev_max".into(), sobolev_max);
    res.checks.push(Check::new(
        "refined_sobolev_finite",
        Some(7),
        sobolev_max.is_finite() && sobolev_max > 0.0,
        sobolev_max,
        f64::INFINITY,
        "largest refined Sobolev ratio over the corpus".into(),
    ));

    let a = -(cfg.d as f64 - 4.0) / 2.0;
    let (scale_grid, scale_basis) = setup(cfg.d, 2.0 * cfg.r_max, cfg.n)?;
    let mut scaled = Vec::new();
    for l in [0.25f64, 1.0, 4.0] {
        let w = 1.5 * l;
        let f = RadialField::from_real(scale_grid.clone(), |r| l.powf(a) * (-r * r / (2.0 * w * w)).exp())?;
        scaled.push(refined_sobolev_check(&f, &scale_basis)?);
    }
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    res.checks.push(Check::at_most(
        "sobolev_scaling",
        Some(7),
        hi / lo - 1.0,
        0.03,
        format!("ratios {} for a width 1.5 Gaussian rescaled by 1/4, 1, 4", list(&scaled)),
    ));
    let find = |name: &str| sobolev_rows.iter().find(|(n, _)| n == name).map(|(_, r)| r[0]);
    if let (Some(spread), Some(single)) = (find("frequency spread"), find("single mode")) {
        res.metrics.insert("sobolev_spread".into(), spread);
        res.metrics.insert("sobolev_single".into(), single);
    }

    decoupling(cfg, out, &mut res)?;
    Ok(res)
}

fn decoupling(cfg: &ExperimentConfig, out: &mut OutputDir, res: &mut ScenarioResult) -> Result<()> {
    let d = cfg.d;
    let source = Grid::build(d, 12.0, 1199)?;
    let target = Grid::build(d, cfg.wide_r_max, cfg.wide_n)?;
    let f = gaussian(&source, 1.0, 1.0)?;
    let steps = cfg.ladder_steps.max(2);
    let fixed: Vec<EnlargedElement> = vec![EnlargedElement::new(GroupElement::identity(), 0.0); steps];
    let moving: Vec<EnlargedElement> = (0..steps)
        .map(|k| EnlargedElement::new(GroupElement::scaling(2f64.powi(k as i32)), 0.0))
        .collect();
    let rep = decoupling_check(&fixed, &moving, &f, &f, None, None, &target)?;
    res.metrics.insert("decoupling_terminal_decay".into(), rep.terminal_decay);
    res.checks.push(Check::new(
        "decoupling_decay",
        Some(8),
        rep.applicable && rep.terminal_decay >= 4.0,
        rep.terminal_decay,
        4.0,
        format!("pairings {}, monotone {}", list(&rep.pairing), rep.monotone),
    ));

    let mut defects = Vec::new();
    let mut worst_identity: f64 = 0.0;
    let zero = RadialField::zeros(target.clone());
    for (a, b) in fixed.iter().zip(&moving) {
        let k = kinetic_decoupling_check(&[(*a, f.clone()), (*b, f.clone())], &zero, &[None, None])?;
        worst_identity = worst_identity.max((k.defect - k.cross_sum).abs() / k.total_kinetic);
        defects.push(k.defect.abs());
    }
    let monotone = defects.windows(2).all(|w| w[1] < w[0]);
    res.checks.push(Check::new(
        "kinetic_defect_monotone",
        Some(8),
        monotone,
        defects[defects.len() - 1] / defects[0],
        1.0,
        format!("defects {}", list(&defects)),
    ));
    res.checks.push(Check::at_most(
        "kinetic_defect_identity",
        Some(8),
        worst_identity,
        1e-10,
        "largest |defect - cross sum| relative to the total kinetic energy".into(),
    ));

    let (grid_t, basis_t) = setup(d, cfg.r_max.max(64.0), 799)?;
    let g = gaussian(&grid_t, 1.0, 1.0)?;
    let times: Vec<f64> = (0..steps).map(|k| 0.0625 * (2f64.powi(k as i32) - 1.0)).collect();
    let fixed_t = vec![EnlargedElement::new(GroupElement::identity(), 0.0); steps];
    let moving_t: Vec<EnlargedElement> = times.iter().map(|&t| EnlargedElement::new(GroupElement::identity(), t)).collect();
    let rep_t = decoupling_check(&fixed_t, &moving_t, &g, &g, Some(&basis_t), Some(&basis_t), &grid_t)?;
    res.metrics.insert("time_divergent_terminal_decay".into(), rep_t.terminal_decay);

    let rows: Vec<Vec<f64>> = (0..steps)
        .map(|k| {
            vec![
                k as f64,
                rep.divergence[k],
                rep.pairing[k],
                defects[k],
                times[k],
                rep_t.divergence[k],
                rep_t.pairing.get(k).copied().unwrap_or(f64::NAN),
            ]
        })
        .collect();
    out.write(
        "decoupling.csv",
        &table_csv(
            &["step", "divergence", "pairing", "kinetic_defect", "flow_time", "flow_divergence", "flow_pairing"],
            &rows,
        )?,
    )?;
    out.line_chart(
        "decoupling.svg",
        "kinetic pairing along diverging sequences",
        "step",
        &[
            ("scale ladder".into(), rows.iter().map(|r| (r[0], r[2])).collect()),
            ("kinetic defect".into(), rows.iter().map(|r| (r[0], r[3])).collect()),
            ("linear flow".into(), rows.iter().map(|r| (r[0], r[6])).collect()),
        ],
    )?;
    Ok(())
}
