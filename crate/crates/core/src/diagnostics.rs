//! Measured functionals: energy pieces, scattering size, localized mass, the virial
//! functional with its lower bound, frequency scale and tail energies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RadialField, SpectralBasis, C64};
use crate::ground_state::two_sharp;

/// Smooth radial cutoff: one on `[0,1]`, zero on `[2,∞)`, degree-7 bridge in between.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cutoff;

impl Cutoff {
    pub fn phi(&self, x: f64) -> f64 {
        if x <= 1.0 {
            1.0
        } else if x >= 2.0 {
            0.0
        } else {
            let t = x - 1.0;
            let t4 = t.powi(4);
            1.0 - t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        if x <= 1.0 || x >= 2.0 {
            return 0.0;
        }
        let t = x - 1.0;
        -140.0 * t.powi(3) * (1.0 - t).powi(3)
    }

    pub fn d2(&self, x: f64) -> f64 {
        if x <= 1.0 || x >= 2.0 {
            return 0.0;
        }
        let t = x - 1.0;
        -420.0 * t * t * (1.0 - t).powi(2) * (1.0 - 2.0 * t)
    }

    pub fn d3(&self, x: f64) -> f64 {
        if x <= 1.0 || x >= 2.0 {
            return 0.0;
        }
        let t = x - 1.0;
        -840.0 * t * (1.0 - t) * (1.0 - 5.0 * t + 5.0 * t * t)
    }
}

/// Mass and the energy pieces of a field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
}

fn energy_with(u: &RadialField, lap: &[C64]) -> Energy {
    let grid = u.grid();
    let d = grid.d();
    let ts = two_sharp(d);
    let mut m = Vec::with_capacity(lap.len());
    let mut k = Vec::with_capacity(lap.len());
    let mut p = Vec::with_capacity(lap.len());
    for (z, l) in u.values().iter().zip(lap) {
        let a2 = z.norm_sqr();
        m.push(a2);
        k.push(l.norm_sqr());
        p.push(a2.powf(0.5 * ts));
    }
    let kinetic = grid.sum(&k);
    let potential = grid.sum(&p);
    Energy {
        mass: grid.sum(&m),
        kinetic,
        potential,
        energy: 0.5 * kinetic - (d as f64 - 4.0) / (2.0 * d as f64) * potential,
    }
}

pub fn energy(u: &RadialField) -> Result<Energy> {
    if !u.is_finite() {
        return Err(Error::NonFinite("field".into()));
    }
    Ok(energy_with(u, &u.laplacian()))
}

/// Exponent `2(d+4)/(d-4)` of the scattering size.
pub fn scattering_exponent(d: usize) -> f64 {
    2.0 * (d as f64 + 4.0) / (d as f64 - 4.0)
}

/// `dt ∫|u|^{2(d+4)/(d-4)}`
pub fn scattering_increment(u: &RadialField, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt {dt} must be positive")));
    }
    let q = scattering_exponent(u.d());
    let dens: Vec<f64> = u.values().iter().map(|z| z.norm().powf(q)).collect();
    Ok(dt * u.grid().sum(&dens))
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("radius {r} must be positive")))
    }
}

/// `∫ φ(|x|/R)|u|²`
pub fn localized_mass(u: &RadialField, radius: f64, cutoff: &Cutoff) -> Result<f64> {
    check_radius(radius)?;
    Ok(Local::new(u).localized_mass(radius, cutoff))
}

/// Right-hand side of the localized-mass rate identity,
/// `−2 Im∫ Δφ_R ū Δu − 4 Im∫ ∇φ_R·∇ū Δu`.
pub fn localized_mass_derivative(u: &RadialField, radius: f64, cutoff: &Cutoff) -> Result<f64> {
    check_radius(radius)?;
    Ok(Local::new(u).localized_mass_rate(radius, cutoff))
}

/// `Im∫ r φ(r/R) ∂_r ū u`
pub fn virial_z(u: &RadialField, radius: f64, cutoff: &Cutoff) -> Result<f64> {
    check_radius(radius)?;
    Ok(Local::new(u).virial_z(radius, cutoff))
}

/// `4∫_{r≤R}(|Δu|² − |u|^{2^#})`
pub fn virial_main_term(u: &RadialField, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    Ok(Local::new(u).virial_main(radius))
}

/// `∫_{R≤r≤2R}(|u||Δu|/R² + |∇u||Δu|/R + |Δu|²)`
pub fn virial_error_budget(u: &RadialField, radius: f64, _cutoff: &Cutoff) -> Result<f64> {
    check_radius(radius)?;
    Ok(Local::new(u).virial_budget(radius))
}

/// `∫_{r≥R}(|Δu|² + |∇u|²/r² + |u|²/r⁴)`
pub fn tail_kinetic(u: &RadialField, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    Ok(Local::new(u).tail(radius))
}

/// Smallest eigenfrequency `N` with `Σ_{√μ_k > N} μ_k²|c_k|² ≤ η Σ μ_k²|c_k|²`.
pub fn frequency_scale(u: &RadialField, basis: &SpectralBasis, eta: f64) -> Result<f64> {
    let c = basis.decompose(u)?;
    frequency_scale_from(&c, basis, eta)
}

pub fn frequency_scale_from(c: &[C64], basis: &SpectralBasis, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside (0, 1)")));
    }
    let mu = basis.eigenvalues();
    let weights: Vec<f64> = c.iter().zip(mu).map(|(z, m)| m * m * z.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroField);
    }
    // suffix[m] = Σ_{k > m} weights[k]
    let n = weights.len();
    let mut suffix = vec![0.0; n];
    for m in (0..n.saturating_sub(1)).rev() {
        suffix[m] = suffix[m + 1] + weights[m + 1];
    }
    let limit = eta * total;
    let idx = suffix.partition_point(|&s| s > limit);
    Ok(mu[idx.min(n - 1)].sqrt())
}

/// `(∫|u|²/r⁴, ∫|∂_r u|²/r²)`
pub fn hardy_terms(u: &RadialField) -> (f64, f64) {
    let l = Local::new(u);
    (l.hardy_u(), l.hardy_grad())
}

/// Samples shared by the local functionals: the field, its Laplacian and its gradient.
pub struct Local<'a> {
    grid: &'a Grid,
    u: &'a [C64],
    lap: Vec<C64>,
    grad: Vec<C64>,
    pot: Vec<f64>,
}

impl<'a> Local<'a> {
    pub fn new(u: &'a RadialField) -> Self {
        let ts = two_sharp(u.d());
        Local {
            grid: u.grid().as_ref(),
            u: u.values(),
            lap: u.laplacian(),
            grad: u.gradient(),
            pot: u.values().iter().map(|z| z.norm_sqr().powf(0.5 * ts)).collect(),
        }
    }

    pub fn laplacian(&self) -> &[C64] {
        &self.lap
    }

    fn fold<F: Fn(usize, f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> f64 {
        let r = self.grid.nodes();
        let w = self.grid.weights();
        let mut s = 0.0;
        for j in 0..r.len() {
            if r[j] >= lo && r[j] <= hi {
                s += w[j] * f(j, r[j]);
            }
        }
        s
    }

    pub fn localized_mass(&self, radius: f64, cut: &Cutoff) -> f64 {
        self.fold(0.0, 2.0 * radius, |j, r| cut.phi(r / radius) * self.u[j].norm_sqr())
    }

    pub fn localized_mass_rate(&self, radius: f64, cut: &Cutoff) -> f64 {
        let d = self.grid.d() as f64;
        self.fold(radius, 2.0 * radius, |j, r| {
            let x = r / radius;
            let dphi = cut.d1(x) / radius;
            let lphi = cut.d2(x) / (radius * radius) + (d - 1.0) / r * dphi;
            let a = lphi * (self.u[j].conj() * self.lap[j]).im;
            let b = dphi * (self.grad[j].conj() * self.lap[j]).im;
            -2.0 * a - 4.0 * b
        })
    }

    pub fn virial_z(&self, radius: f64, cut: &Cutoff) -> f64 {
        self.fold(0.0, 2.0 * radius, |j, r| r * cut.phi(r / radius) * (self.grad[j].conj() * self.u[j]).im)
    }

    pub fn virial_main(&self, radius: f64) -> f64 {
        4.0 * self.fold(0.0, radius, |j, _| self.lap[j].norm_sqr() - self.pot[j])
    }

    pub fn virial_budget(&self, radius: f64) -> f64 {
        self.fold(radius, 2.0 * radius, |j, _| {
            let l = self.lap[j].norm();
            self.u[j].norm() * l / (radius * radius) + self.grad[j].norm() * l / radius + l * l
        })
    }

    pub fn tail(&self, radius: f64) -> f64 {
        self.fold(radius, f64::INFINITY, |j, r| {
            self.lap[j].norm_sqr() + self.grad[j].norm_sqr() / (r * r) + self.u[j].norm_sqr() / r.powi(4)
        })
    }

    pub fn hardy_u(&self) -> f64 {
        self.fold(0.0, f64::INFINITY, |j, r| self.u[j].norm_sqr() / r.powi(4))
    }

    pub fn hardy_grad(&self) -> f64 {
        self.fold(0.0, f64::INFINITY, |j, r| self.grad[j].norm_sqr() / (r * r))
    }
}

/// Parameters of the per-step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSpec {
    pub radii: Vec<f64>,
    pub eta: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec { radii: vec![4.0, 8.0, 16.0], eta: 0.5 }
    }
}

/// Everything recorded at one time level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub s_accum: f64,
    pub n_t: f64,
    pub hardy_u: f64,
    pub hardy_grad: f64,
    pub sup_norm: f64,
    /// One entry per radius in the spec, in order.
    pub localized_mass: Vec<f64>,
    pub localized_mass_rate: Vec<f64>,
    pub virial_z: Vec<f64>,
    pub virial_main: Vec<f64>,
    pub virial_budget: Vec<f64>,
    pub tail: Vec<f64>,
}

impl DiagnosticsRecord {
    pub fn tail_fraction(&self, k: usize) -> f64 {
        if self.kinetic > 0.0 {
            self.tail[k] / self.kinetic
        } else {
            0.0
        }
    }
}

/// Evaluates a full record. `coeffs` are the eigen-coefficients of `u` when available.
pub fn record(
    u: &RadialField,
    t: f64,
    s_accum: f64,
    coeffs: Option<&[C64]>,
    basis: &SpectralBasis,
    spec: &DiagnosticsSpec,
) -> Result<DiagnosticsRecord> {
    if !u.is_finite() {
        return Err(Error::NonFinite(format!("field at t = {t}")));
    }
    let local = Local::new(u);
    let e = energy_with(u, local.laplacian());
    let cut = Cutoff;
    let owned;
    let c = match coeffs {
        Some(c) => c,
        None => {
            owned = basis.decompose(u)?;
            &owned
        }
    };
    let n_t = match frequency_scale_from(c, basis, spec.eta) {
        Ok(v) => v,
        Err(Error::ZeroField) => 0.0,
        Err(e) => return Err(e),
    };
    let radii = &spec.radii;
    Ok(DiagnosticsRecord {
        t,
        mass: e.mass,
        kinetic: e.kinetic,
        potential: e.potential,
        energy: e.energy,
        s_accum,
        n_t,
        hardy_u: local.hardy_u(),
        hardy_grad: local.hardy_grad(),
        sup_norm: u.lp_norm(f64::INFINITY),
        localized_mass: radii.iter().map(|&r| local.localized_mass(r, &cut)).collect(),
        localized_mass_rate: radii.iter().map(|&r| local.localized_mass_rate(r, &cut)).collect(),
        virial_z: radii.iter().map(|&r| local.virial_z(r, &cut)).collect(),
        virial_main: radii.iter().map(|&r| local.virial_main(r)).collect(),
        virial_budget: radii.iter().map(|&r| local.virial_budget(r)).collect(),
        tail: radii.iter().map(|&r| local.tail(r)).collect(),
    })
}
