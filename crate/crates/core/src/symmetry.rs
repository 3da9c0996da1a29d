//! The radial symmetry group (phase and scaling), its enlargement by the linear flow,
//! normalization of snapshots and asymptotic-orthogonality checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::frequency_scale;
use crate::error::{Error, Result};
use crate::grid::{Grid, RadialField, SpectralBasis, C64};
use crate::propagator::linear_step;

/// `g_{θ,λ} f = λ^{−(d−4)/2} e^{iθ} f(r/λ)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub theta: f64,
    pub lambda: f64,
}

impl GroupElement {
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale {lambda} must be positive")));
        }
        Ok(GroupElement { theta, lambda })
    }

    pub fn identity() -> Self {
        GroupElement { theta: 0.0, lambda: 1.0 }
    }

    pub fn scaling(lambda: f64) -> Self {
        GroupElement { theta: 0.0, lambda }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement { theta: self.theta + other.theta, lambda: self.lambda * other.lambda }
    }
}

/// A group element preceded by the linear flow for time `t0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnlargedElement {
    pub base: GroupElement,
    pub t0: f64,
}

impl EnlargedElement {
    pub fn new(base: GroupElement, t0: f64) -> Self {
        EnlargedElement { base, t0 }
    }
}

/// Natural cubic spline through the even extension of the samples, vanishing at the wall.
struct EvenSpline {
    x: Vec<f64>,
    y: Vec<C64>,
    m: Vec<C64>,
}

impl EvenSpline {
    fn new(u: &RadialField) -> Self {
        let r = u.grid().nodes();
        let n = r.len();
        let mut x = Vec::with_capacity(2 * n + 2);
        let mut y = Vec::with_capacity(2 * n + 2);
        x.push(-u.grid().r_max());
        y.push(C64::new(0.0, 0.0));
        for j in (0..n).rev() {
            x.push(-r[j]);
            y.push(u.values()[j]);
        }
        for j in 0..n {
            x.push(r[j]);
            y.push(u.values()[j]);
        }
        x.push(u.grid().r_max());
        y.push(C64::new(0.0, 0.0));
        let m = Self::second_derivatives(&x, &y);
        EvenSpline { x, y, m }
    }

    fn second_derivatives(x: &[f64], y: &[C64]) -> Vec<C64> {
        let k = x.len();
        let mut m = vec![C64::new(0.0, 0.0); k];
        if k < 3 {
            return m;
        }
        // Thomas algorithm on the interior equations
        let mut cp = vec![0.0; k];
        let mut dp = vec![C64::new(0.0, 0.0); k];
        for i in 1..k - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let c = h1 / 6.0;
            let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * cp[i - 1];
            cp[i] = c / denom;
            dp[i] = (rhs - dp[i - 1] * a) / denom;
        }
        for i in (1..k - 1).rev() {
            m[i] = dp[i] - m[i + 1] * cp[i];
        }
        m
    }

    fn eval(&self, t: f64) -> C64 {
        let t = t.abs();
        let k = self.x.len();
        if t >= self.x[k - 1] {
            return C64::new(0.0, 0.0);
        }
        let i = self.x.partition_point(|&v| v <= t).clamp(1, k - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        self.y[i] * a + self.y[i + 1] * b + (self.m[i] * (a * a * a - a) + self.m[i + 1] * (b * b * b - b)) * (h * h / 6.0)
    }
}

fn overflow_check(u: &RadialField, lambda: f64, target: &Grid) -> Result<()> {
    let limit = target.r_max() / lambda;
    let dens: Vec<f64> = u.values().iter().map(|z| z.norm_sqr()).collect();
    let total = u.grid().sum(&dens);
    if total == 0.0 {
        return Ok(());
    }
    let lost = u.grid().sum_between(&dens, limit, f64::INFINITY) / total;
    if lost > 1e-10 {
        return Err(Error::SupportOverflow(format!(
            "fraction {lost:.3e} of the mass lies past r = {limit:.4} after scaling by {lambda}"
        )));
    }
    Ok(())
}

/// Samples of `g u` on `target`, interpolating `u` by an even cubic spline.
pub fn apply(g: &GroupElement, u: &RadialField, target: &Arc<Grid>) -> Result<RadialField> {
    let g = GroupElement::new(g.theta, g.lambda)?;
    if target.d() != u.d() {
        return Err(Error::GridMismatch);
    }
    overflow_check(u, g.lambda, target)?;
    let d = u.d() as f64;
    let factor = C64::from_polar(g.lambda.powf(-(d - 4.0) / 2.0), g.theta);
    if g.lambda == 1.0 && u.grid().spec() == target.spec() {
        return Ok(u.scale(factor));
    }
    let spline = EvenSpline::new(u);
    RadialField::from_fn(target.clone(), |r| factor * spline.eval(r / g.lambda))
}

/// `g e^{i t0 Δ²} u` on the grid of `basis`.
pub fn apply_enlarged(g: &EnlargedElement, u: &RadialField, basis: &SpectralBasis) -> Result<RadialField> {
    apply_enlarged_to(g, u, Some(basis), basis.grid())
}

/// `g e^{i t0 Δ²} u` sampled on `target`; the basis of `u`'s grid is needed only when `t0 ≠ 0`.
pub fn apply_enlarged_to(
    g: &EnlargedElement,
    u: &RadialField,
    basis: Option<&SpectralBasis>,
    target: &Arc<Grid>,
) -> Result<RadialField> {
    let moved = if g.t0 == 0.0 {
        u.clone()
    } else {
        let basis = basis.ok_or_else(|| Error::InvalidParameter("linear flow requested without a basis".into()))?;
        linear_step(u, g.t0, basis)?
    };
    apply(&g.base, &moved, target)
}

/// Rescales `u` so that its frequency scale becomes one.
pub fn normalize_snapshot(u: &RadialField, n_t: f64, basis: &SpectralBasis) -> Result<RadialField> {
    if u.values().iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::ZeroField);
    }
    if !(n_t > 0.0 && n_t.is_finite()) {
        return Err(Error::InvalidParameter(format!("frequency scale {n_t} must be positive")));
    }
    apply(&GroupElement::scaling(n_t), u, basis.grid())
}

/// Measures the frequency scale and normalizes in one call.
pub fn normalize(u: &RadialField, basis: &SpectralBasis, eta: f64) -> Result<RadialField> {
    let n_t = frequency_scale(u, basis, eta)?;
    normalize_snapshot(u, n_t, basis)
}

/// `λ/λ' + λ'/λ + |t λ⁴ − t' λ'⁴| / (λ² λ'²)`
pub fn divergence(a: &EnlargedElement, b: &EnlargedElement) -> f64 {
    let (l1, l2) = (a.base.lambda, b.base.lambda);
    l1 / l2 + l2 / l1 + (a.t0 * l1.powi(4) - b.t0 * l2.powi(4)).abs() / (l1 * l1 * l2 * l2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub applicable: bool,
    pub divergence: Vec<f64>,
    /// `|⟨Δ g_{1,n} f₁, Δ g_{2,n} f₂⟩|` along the sequence.
    pub pairing: Vec<f64>,
    pub monotone: bool,
    /// First over last pairing.
    pub terminal_decay: f64,
}

fn kinetic_pairing(a: &RadialField, b: &RadialField) -> Result<C64> {
    let la = RadialField::new(a.grid().clone(), a.laplacian())?;
    let lb = RadialField::new(b.grid().clone(), b.laplacian())?;
    la.inner(&lb)
}

/// Pairs the two transformed profiles along the sequences on a common `target` grid.
pub fn decoupling_check(
    g1: &[EnlargedElement],
    g2: &[EnlargedElement],
    f1: &RadialField,
    f2: &RadialField,
    basis1: Option<&SpectralBasis>,
    basis2: Option<&SpectralBasis>,
    target: &Arc<Grid>,
) -> Result<DecouplingReport> {
    if g1.len() != g2.len() || g1.is_empty() {
        return Err(Error::InvalidParameter("sequences must be nonempty and of equal length".into()));
    }
    let divergence: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| divergence(a, b)).collect();
    let growing = divergence.windows(2).all(|w| w[1] > w[0]);
    let applicable = growing && divergence[divergence.len() - 1] > divergence[0];
    if !applicable {
        return Ok(DecouplingReport { applicable, divergence, pairing: vec![], monotone: false, terminal_decay: 0.0 });
    }
    let mut pairing = Vec::with_capacity(g1.len());
    for (a, b) in g1.iter().zip(g2) {
        let u = apply_enlarged_to(a, f1, basis1, target)?;
        let v = apply_enlarged_to(b, f2, basis2, target)?;
        pairing.push(kinetic_pairing(&u, &v)?.norm());
    }
    let monotone = pairing.windows(2).all(|w| w[1] <= w[0]);
    let terminal_decay = pairing[0] / pairing[pairing.len() - 1];
    Ok(DecouplingReport { applicable, divergence, pairing, monotone, terminal_decay })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticDecouplingReport {
    /// `‖Δu‖² − Σ‖Δ g_j φ_j‖² − ‖Δw‖²`
    pub defect: f64,
    /// `2 Re Σ_{i<j} ⟨Δa_i, Δa_j⟩` over the transformed profiles and the remainder.
    pub cross_sum: f64,
    pub total_kinetic: f64,
    pub profile_kinetic: Vec<f64>,
    pub remainder_kinetic: f64,
}

/// Assembles `u = Σ g_j φ_j + w` on the remainder's grid and measures the kinetic defect.
pub fn kinetic_decoupling_check(
    profiles: &[(EnlargedElement, RadialField)],
    remainder: &RadialField,
    bases: &[Option<&SpectralBasis>],
) -> Result<KineticDecouplingReport> {
    if bases.len() != profiles.len() {
        return Err(Error::InvalidParameter("one basis per profile is required".into()));
    }
    let target = remainder.grid().clone();
    let mut parts = Vec::with_capacity(profiles.len() + 1);
    for ((g, phi), basis) in profiles.iter().zip(bases) {
        parts.push(apply_enlarged_to(g, phi, *basis, &target)?);
    }
    parts.push(remainder.clone());
    let mut total = RadialField::zeros(target.clone());
    for p in &parts {
        total = total.add(p)?;
    }
    let sq = |f: &RadialField| f.h2_norm().powi(2);
    let total_kinetic = sq(&total);
    let profile_kinetic: Vec<f64> = parts[..profiles.len()].iter().map(sq).collect();
    let remainder_kinetic = sq(remainder);
    let mut cross_sum = 0.0;
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            cross_sum += 2.0 * kinetic_pairing(&parts[i], &parts[j])?.re;
        }
    }
    let defect = total_kinetic - profile_kinetic.iter().sum::<f64>() - remainder_kinetic;
    Ok(KineticDecouplingReport { defect, cross_sum, total_kinetic, profile_kinetic, remainder_kinetic })
}
