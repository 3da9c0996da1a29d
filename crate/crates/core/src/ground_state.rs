//! The explicit ground state `W`, its sharp constants and the energy-trapping functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy, Cutoff};
use crate::error::{Error, Result};
use crate::grid::{Grid, RadialField, C64};
use crate::quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateParams {
    pub d: usize,
    pub theta: f64,
    pub lambda: f64,
}

impl GroundStateParams {
    pub fn new(d: usize, theta: f64, lambda: f64) -> Result<Self> {
        if d < 5 {
            return Err(Error::InvalidParameter(format!("dimension {d} < 5")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("scale {lambda} must be positive")));
        }
        Ok(GroundStateParams { d, theta, lambda })
    }

    pub fn unit(d: usize) -> Self {
        GroundStateParams { d, theta: 0.0, lambda: 1.0 }
    }
}

/// Critical Sobolev exponent `2d/(d-4)`.
pub fn two_sharp(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 - 4.0)
}

/// Power `8/(d-4)` of the nonlinearity.
pub fn nonlinear_power(d: usize) -> f64 {
    8.0 / (d as f64 - 4.0)
}

fn amplitude(d: usize) -> f64 {
    let d = d as f64;
    (d * (d - 4.0) * (d * d - 4.0)).powf(0.25)
}

/// Real profile `λ^{(d-4)/2} W(λ r)` of the unit-phase ground state.
pub fn w_profile(d: usize, lambda: f64, r: f64) -> f64 {
    let a = (d as f64 - 4.0) / 2.0;
    let x = lambda * r;
    lambda.powf(a) * (amplitude(d) / (1.0 + x * x)).powf(a)
}

/// Closed-form radial Laplacian of [`w_profile`].
pub fn w_laplacian_profile(d: usize, lambda: f64, r: f64) -> f64 {
    let a = (d as f64 - 4.0) / 2.0;
    let x = lambda * r;
    let c = amplitude(d).powf(a);
    let base = -(d as f64 - 4.0) * c * (1.0 + x * x).powf(-a - 2.0) * (d as f64 + 2.0 * x * x);
    lambda.powf(a + 2.0) * base
}

pub fn eval_w(params: &GroundStateParams, grid: &Arc<Grid>) -> Result<RadialField> {
    let p = GroundStateParams::new(params.d, params.theta, params.lambda)?;
    if grid.d() != p.d {
        return Err(Error::GridMismatch);
    }
    let phase = C64::from_polar(1.0, p.theta);
    RadialField::from_fn(grid.clone(), |r| phase * w_profile(p.d, p.lambda, r))
}

/// `W` multiplied by the cutoff `φ(r/ρ)`, so that the field vanishes well inside the wall.
pub fn eval_w_windowed(params: &GroundStateParams, grid: &Arc<Grid>, rho: f64) -> Result<RadialField> {
    let w = eval_w(params, grid)?;
    let cut = Cutoff;
    Ok(w.map(|r, z| z * cut.phi(r / rho)))
}

/// Constants attached to the ground state, measured on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpConstants {
    pub d: usize,
    /// `∫|ΔW|²`
    pub kin_w: f64,
    /// `∫|W|^{2^#}`
    pub potential_w: f64,
    /// `E(W)`
    pub e_w: f64,
    /// `C_d^{-d/2}`
    pub y_c: f64,
    /// Best Sobolev constant.
    pub cd: f64,
    pub two_sharp: f64,
}

impl SharpConstants {
    /// `C_d^{2^#}`
    pub fn cd_pow(&self) -> f64 {
        self.cd.powf(self.two_sharp)
    }
}

/// Measures the constants from `W` on `grid`. The stencil reads the closed form past the
/// wall and the integrals past the last shell are added by adaptive quadrature.
pub fn sharp_constants(d: usize, grid: &Arc<Grid>) -> Result<SharpConstants> {
    if grid.d() != d {
        return Err(Error::GridMismatch);
    }
    let p = GroundStateParams::unit(d);
    let w = eval_w(&p, grid)?;
    let h = grid.h();
    let n = grid.n();
    let ghost = C64::new(w_profile(d, 1.0, (n + 1) as f64 * h), 0.0);
    let lap = grid.laplacian_with_exterior(w.values(), ghost);
    let ts = two_sharp(d);
    let kin_dens: Vec<f64> = lap.iter().map(|z| z.norm_sqr()).collect();
    let pot_dens: Vec<f64> = w.values().iter().map(|z| z.norm().powf(ts)).collect();
    let edge = grid.outer_face();
    let sphere = grid.sphere();
    let dm1 = d as i32 - 1;
    let kin_tail = quadrature::integrate_to_infinity(
        |r| sphere * r.powi(dm1) * w_laplacian_profile(d, 1.0, r).powi(2),
        edge,
        1e-14,
    );
    let pot_tail = quadrature::integrate_to_infinity(
        |r| sphere * r.powi(dm1) * w_profile(d, 1.0, r).powf(ts),
        edge,
        1e-14,
    );
    let kin_w = grid.integrate(&kin_dens)? + kin_tail;
    let potential_w = grid.integrate(&pot_dens)? + pot_tail;
    let e_w = 0.5 * kin_w - (d as f64 - 4.0) / (2.0 * d as f64) * potential_w;
    let cd = potential_w.powf(1.0 / ts) / kin_w.sqrt();
    let y_c = cd.powf(-(d as f64) / 2.0);
    let consts = SharpConstants { d, kin_w, potential_w, e_w, y_c, cd, two_sharp: ts };
    let ratio = e_w / kin_w;
    if (ratio - 2.0 / d as f64).abs() > 1e-3 {
        return Err(Error::ResolutionInsufficient(format!(
            "E(W)/kinetic = {ratio:.6} against {:.6}",
            2.0 / d as f64
        )));
    }
    Ok(consts)
}

/// `‖Δ_h²W − |W|^{8/(d-4)}W‖₂ / ‖|W|^{8/(d-4)}W‖₂` for a sampled ground state.
pub fn elliptic_residual(w: &RadialField, params: &GroundStateParams) -> Result<f64> {
    let grid = w.grid();
    let d = grid.d();
    if params.d != d {
        return Err(Error::GridMismatch);
    }
    let phase = C64::from_polar(1.0, params.theta);
    let n = grid.n();
    let h = grid.h();
    let ext = [
        phase * w_profile(d, params.lambda, (n + 1) as f64 * h),
        phase * w_profile(d, params.lambda, (n + 2) as f64 * h),
    ];
    let bil = grid.bilaplacian_with_exterior(w.values(), ext);
    let power = nonlinear_power(d);
    let mut num = Vec::with_capacity(n);
    let mut den = Vec::with_capacity(n);
    for (b, u) in bil.iter().zip(w.values()) {
        let f = u * u.norm().powf(power);
        num.push((b - f).norm_sqr());
        den.push(f.norm_sqr());
    }
    Ok((grid.sum(&num) / grid.sum(&den)).sqrt())
}

/// `f(y) = ½y − ((d−4)/2d) C_d^{2^#} y^{d/(d−4)}`
pub fn trap_f(y: f64, c: &SharpConstants) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::NegativeArgument(y));
    }
    let d = c.d as f64;
    Ok(0.5 * y - (d - 4.0) / (2.0 * d) * c.cd_pow() * y.powf(d / (d - 4.0)))
}

/// `g(y) = y − C_d^{2^#} y^{d/(d−4)}`
pub fn trap_g(y: f64, c: &SharpConstants) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::NegativeArgument(y));
    }
    let d = c.d as f64;
    Ok(y - c.cd_pow() * y.powf(d / (d - 4.0)))
}

/// Kinetic margin certified by the trapping function `f`: `1 − ȳ/y_C` with `f(ȳ) = (1−δ₀)E(W)`.
pub fn delta_bar(delta0: f64, c: &SharpConstants) -> Result<f64> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta0 {delta0} outside (0, 1]")));
    }
    let target = (1.0 - delta0) * c.e_w;
    if target <= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, c.y_c);
    if trap_f(hi, c)? < target {
        return Err(Error::Bracketing(format!("f(y_C) below {target}")));
    }
    while (hi - lo) > 1e-13 * c.y_c {
        let mid = 0.5 * (lo + hi);
        if trap_f(mid, c)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(1.0 - 0.5 * (lo + hi) / c.y_c)
}

/// Smallest ratio `g(y)/y` over `0 < y ≤ (1−δ̄) y_C`, found by a dense scan.
pub fn coercivity_margin(delta_bar: f64, c: &SharpConstants) -> Result<f64> {
    let top = (1.0 - delta_bar) * c.y_c;
    if top <= 0.0 {
        return Ok(1.0);
    }
    let samples = 10_000;
    let mut best = f64::INFINITY;
    for k in 1..=samples {
        let y = top * k as f64 / samples as f64;
        best = best.min(trap_g(y, c)? / y);
    }
    Ok(best)
}

/// Outcome of the three trapping inequalities for a single field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingReport {
    pub hypotheses_met: bool,
    pub delta_bar: f64,
    pub coercivity: f64,
    pub kinetic_bound_holds: bool,
    pub coercive_bound_holds: bool,
    pub energy_nonnegative: bool,
    /// `(1−δ̄)∫|ΔW|² − ∫|Δu|²`
    pub kinetic_margin: f64,
    /// `∫(|Δu|² − |u|^{2^#}) − c∫|Δu|²`
    pub coercive_margin: f64,
    /// `E(u)`
    pub energy_margin: f64,
}

impl TrappingReport {
    pub fn all_hold(&self) -> bool {
        self.hypotheses_met && self.kinetic_bound_holds && self.coercive_bound_holds && self.energy_nonnegative
    }
}

/// Precomputed thresholds for repeated trapping checks along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingThresholds {
    pub delta0: f64,
    pub delta_bar: f64,
    pub coercivity: f64,
    pub kin_w: f64,
    pub e_w: f64,
}

impl TrappingThresholds {
    pub fn new(c: &SharpConstants, delta0: f64) -> Result<Self> {
        let db = delta_bar(delta0, c)?;
        Ok(TrappingThresholds {
            delta0,
            delta_bar: db,
            coercivity: coercivity_margin(db, c)?,
            kin_w: c.kin_w,
            e_w: c.e_w,
        })
    }

    pub fn hypotheses(&self, kinetic: f64, energy: f64) -> bool {
        kinetic < self.kin_w && energy < (1.0 - self.delta0) * self.e_w
    }

    /// Evaluates the inequalities from measured kinetic, potential and energy values.
    pub fn evaluate(&self, kinetic: f64, potential: f64, energy: f64, hypotheses_met: bool) -> TrappingReport {
        let kinetic_margin = (1.0 - self.delta_bar) * self.kin_w - kinetic;
        let coercive_margin = (kinetic - potential) - self.coercivity * kinetic;
        TrappingReport {
            hypotheses_met,
            delta_bar: self.delta_bar,
            coercivity: self.coercivity,
            kinetic_bound_holds: kinetic_margin >= 0.0,
            coercive_bound_holds: coercive_margin >= 0.0,
            energy_nonnegative: energy >= 0.0,
            kinetic_margin,
            coercive_margin,
            energy_margin: energy,
        }
    }
}

pub fn check_trapping(u: &RadialField, c: &SharpConstants, delta0: f64) -> Result<TrappingReport> {
    let th = TrappingThresholds::new(c, delta0)?;
    let e = energy(u)?;
    let met = th.hypotheses(e.kinetic, e.energy);
    Ok(th.evaluate(e.kinetic, e.potential, e.energy, met))
}
