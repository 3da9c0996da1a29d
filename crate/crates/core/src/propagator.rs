//! Exact discrete linear flow, the pointwise nonlinear phase flow, and their Strang
//! composition with per-step diagnostics and guards.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord, DiagnosticsSpec};
use crate::error::{Error, Result};
use crate::grid::{RadialField, SpectralBasis, C64};
use crate::ground_state::nonlinear_power;

/// `u ↦ e^{itΔ²}u`, exact in the eigenbasis.
pub fn linear_step(u: &RadialField, t: f64, basis: &SpectralBasis) -> Result<RadialField> {
    let mut c = basis.decompose(u)?;
    for (z, mu) in c.iter_mut().zip(basis.eigenvalues()) {
        *z *= C64::from_polar(1.0, t * mu * mu);
    }
    basis.reconstruct(&c)
}

/// `u_j ↦ u_j e^{−i|u_j|^{8/(d−4)} t}` with the default overflow limit.
pub fn nonlinear_step(u: &RadialField, t: f64, d: usize) -> Result<RadialField> {
    nonlinear_step_limited(u, t, d, Guards::default().overflow)
}

pub fn nonlinear_step_limited(u: &RadialField, t: f64, d: usize, limit: f64) -> Result<RadialField> {
    if !u.is_finite() {
        return Err(Error::NonFinite("nonlinear step input".into()));
    }
    let p = nonlinear_power(d);
    let peak = u.values().iter().map(|z| z.norm().powf(p)).fold(0.0, f64::max);
    let out = u.map(|_, z| z * C64::from_polar(1.0, -z.norm().powf(p) * t));
    if peak > limit {
        return Err(Error::Overflow(format!("|u|^p = {peak:.3e} above {limit:.3e}")));
    }
    Ok(out)
}

/// Tolerances that stop a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    /// Relative energy drift `|E(t) − E(0)| / max(1, |E(0)|)`.
    pub energy_drift: f64,
    /// Fraction of mass beyond `0.9 r_max`.
    pub boundary_tail: f64,
    /// Largest admissible `|u|^{8/(d−4)}`.
    pub overflow: f64,
    /// Largest admissible `N(t) h`.
    pub concentration: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Guards { energy_drift: 1e-2, boundary_tail: 1e-3, overflow: 1e8, concentration: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    KineticConcentration,
    EnergyDrift,
    BoundaryTail,
    Overflow,
}

impl GuardKind {
    pub fn label(&self) -> &'static str {
        match self {
            GuardKind::KineticConcentration => "kinetic concentration",
            GuardKind::EnergyDrift => "energy drift",
            GuardKind::BoundaryTail => "boundary tail",
            GuardKind::Overflow => "overflow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardEvent {
    pub kind: GuardKind,
    pub step: usize,
    pub t: f64,
    pub value: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub guards: Guards,
    /// Keep a snapshot every this many steps (the initial and final fields are always kept).
    pub snapshot_every: usize,
    pub diagnostics: DiagnosticsSpec,
    /// Switch off the nonlinear substeps to follow the free flow.
    pub nonlinear: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        SolverConfig {
            dt,
            t_final,
            guards: Guards::default(),
            snapshot_every: 0,
            diagnostics: DiagnosticsSpec::default(),
            nonlinear: true,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt {} must be positive", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("T {} must be positive", self.t_final)));
        }
        let g = &self.guards;
        if !(g.energy_drift > 0.0 && g.boundary_tail > 0.0 && g.overflow > 0.0 && g.concentration > 0.0) {
            return Err(Error::InvalidParameter("guards must be positive".into()));
        }
        if !(self.diagnostics.eta > 0.0 && self.diagnostics.eta < 1.0) {
            return Err(Error::InvalidParameter("eta outside (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Times of the diagnostic records.
    pub times: Vec<f64>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<RadialField>,
    pub guard: Option<GuardEvent>,
    pub final_field: RadialField,
}

impl Trajectory {
    pub fn guard_free(&self) -> bool {
        self.guard.is_none()
    }

    /// Largest relative energy drift over the records.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.diagnostics[0].energy;
        let scale = e0.abs().max(1.0);
        self.diagnostics.iter().map(|r| (r.energy - e0).abs() / scale).fold(0.0, f64::max)
    }

    /// Largest relative mass drift over the records.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].mass;
        self.diagnostics.iter().map(|r| (r.mass - m0).abs() / m0.max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }
}

/// One Strang step `N(dt/2) L(dt) N(dt/2)` with precomputed linear phases.
pub struct Stepper<'a> {
    basis: &'a SpectralBasis,
    phases: Vec<C64>,
    dt: f64,
    d: usize,
    nonlinear: bool,
    overflow: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(basis: &'a SpectralBasis, dt: f64, nonlinear: bool, overflow: f64) -> Self {
        let phases = basis.eigenvalues().iter().map(|mu| C64::from_polar(1.0, dt * mu * mu)).collect();
        Stepper { basis, phases, dt, d: basis.grid().d(), nonlinear, overflow }
    }

    pub fn step(&self, u: &RadialField) -> Result<RadialField> {
        let half = 0.5 * self.dt;
        let a = if self.nonlinear { nonlinear_step_limited(u, half, self.d, self.overflow)? } else { u.clone() };
        let mut c = self.basis.decompose(&a)?;
        for (z, ph) in c.iter_mut().zip(&self.phases) {
            *z *= ph;
        }
        let b = self.basis.reconstruct(&c)?;
        if self.nonlinear {
            nonlinear_step_limited(&b, half, self.d, self.overflow)
        } else {
            Ok(b)
        }
    }
}

fn boundary_fraction(u: &RadialField) -> f64 {
    let grid = u.grid();
    let dens: Vec<f64> = u.values().iter().map(|z| z.norm_sqr()).collect();
    let total = grid.sum(&dens);
    if total <= 0.0 {
        return 0.0;
    }
    grid.sum_between(&dens, 0.9 * grid.r_max(), f64::INFINITY) / total
}

fn guard_check(rec: &DiagnosticsRecord, e0: f64, u: &RadialField, g: &Guards, step: usize) -> Option<GuardEvent> {
    let h = u.grid().h();
    let d = u.d();
    let event = |kind, value, limit| Some(GuardEvent { kind, step, t: rec.t, value, limit });
    let conc = rec.n_t * h;
    if conc > g.concentration {
        return event(GuardKind::KineticConcentration, conc, g.concentration);
    }
    let drift = (rec.energy - e0).abs() / e0.abs().max(1.0);
    if drift > g.energy_drift {
        return event(GuardKind::EnergyDrift, drift, g.energy_drift);
    }
    let tail = boundary_fraction(u);
    if tail > g.boundary_tail {
        return event(GuardKind::BoundaryTail, tail, g.boundary_tail);
    }
    let peak = rec.sup_norm.powf(nonlinear_power(d));
    if peak > g.overflow {
        return event(GuardKind::Overflow, peak, g.overflow);
    }
    None
}

/// Strang evolution recording diagnostics at every step. A tripped guard ends the run and is
/// stored on the trajectory; non-finite samples are a hard error.
pub fn evolve(u0: &RadialField, cfg: &SolverConfig, basis: &SpectralBasis) -> Result<Trajectory> {
    evolve_observed(u0, cfg, basis, |_, _, _| {})
}

/// As [`evolve`], calling `observe(step, t, u)` on every time level including the initial one.
pub fn evolve_observed<F>(u0: &RadialField, cfg: &SolverConfig, basis: &SpectralBasis, mut observe: F) -> Result<Trajectory>
where
    F: FnMut(usize, f64, &RadialField),
{
    cfg.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial data".into()));
    }
    let steps = cfg.steps();
    let stepper = Stepper::new(basis, cfg.dt, cfg.nonlinear, f64::INFINITY);
    let spec = &cfg.diagnostics;
    let mut u = u0.clone();
    let mut s_accum = 0.0;
    let first = diagnostics::record(&u, 0.0, 0.0, None, basis, spec)?;
    let e0 = first.energy;
    let mut times = vec![0.0];
    let mut records = vec![first];
    let mut snapshot_times = vec![0.0];
    let mut snapshots = vec![u.clone()];
    let mut guard = None;
    observe(0, 0.0, &u);
    for step in 1..=steps {
        s_accum += diagnostics::scattering_increment(&u, cfg.dt)?;
        u = stepper.step(&u)?;
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("field at step {step}")));
        }
        let t = step as f64 * cfg.dt;
        let rec = diagnostics::record(&u, t, s_accum, None, basis, spec)?;
        let tripped = guard_check(&rec, e0, &u, &cfg.guards, step);
        times.push(t);
        records.push(rec);
        observe(step, t, &u);
        if tripped.is_some() {
            guard = tripped;
            break;
        }
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 && step != steps {
            snapshot_times.push(t);
            snapshots.push(u.clone());
        }
    }
    let t_last = *times.last().unwrap();
    if *snapshot_times.last().unwrap() != t_last {
        snapshot_times.push(t_last);
        snapshots.push(u.clone());
    }
    Ok(Trajectory { times, diagnostics: records, snapshot_times, snapshots, guard, final_field: u })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `‖Δ_h(perturbation)‖₂`
    pub initial_difference: f64,
    /// Largest `‖Δ_h(u − v)‖₂` over the compared times.
    pub sup_difference: f64,
    pub ratio: f64,
    pub base_guard: Option<GuardEvent>,
    pub perturbed_guard: Option<GuardEvent>,
    pub compared_steps: usize,
}

/// Evolves `u0` and `u0 + perturbation` and compares them in `Ḣ²` at every step.
pub fn stability_experiment(
    u0: &RadialField,
    perturbation: &RadialField,
    cfg: &SolverConfig,
    basis: &SpectralBasis,
) -> Result<StabilityReport> {
    let v0 = u0.add(perturbation)?;
    let mut base = Vec::new();
    let tb = evolve_observed(u0, cfg, basis, |_, _, u| base.push(u.clone()))?;
    let mut sup: f64 = 0.0;
    let mut compared = 0;
    let tp = evolve_observed(&v0, cfg, basis, |step, _, v| {
        if let Some(u) = base.get(step) {
            let diff = v.sub(u).expect("shared grid");
            sup = sup.max(diff.h2_norm());
            compared += 1;
        }
    })?;
    let initial = perturbation.h2_norm();
    Ok(StabilityReport {
        initial_difference: initial,
        sup_difference: sup,
        ratio: if initial > 0.0 { sup / initial } else { 0.0 },
        base_guard: tb.guard,
        perturbed_guard: tp.guard,
        compared_steps: compared,
    })
}
