//! Littlewood–Paley projections in the eigenbasis of the discrete Laplacian, with the
//! frequency variable `√μ_k`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::Cutoff;
use crate::error::{Error, Result};
use crate::grid::{RadialField, SpectralBasis, C64};
use crate::ground_state::two_sharp;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    /// Bump equal to one on `[0, 1]`, vanishing past `11/10`.
    #[default]
    Smooth,
    /// Indicator of `[0, 1]`.
    Sharp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// `P_N`
    Shell,
    /// `P_{≤N}`
    Low,
    /// `P_{≥N}`
    High,
    /// `P_{N/2} + P_N + P_{2N}`
    Fattened,
}

impl MultiplierKind {
    /// The low-pass symbol at `x = |ξ|/N`.
    pub fn bump(&self, x: f64) -> f64 {
        match self {
            MultiplierKind::Sharp => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            MultiplierKind::Smooth => Cutoff.phi(1.0 + (x - 1.0) * 10.0),
        }
    }

    /// Symbol of the requested projection at frequency `xi`.
    pub fn symbol(&self, proj: Projection, xi: f64, n: f64) -> f64 {
        let b = |m: f64| self.bump(xi / m);
        match proj {
            Projection::Low => b(n),
            Projection::High => 1.0 - b(n),
            Projection::Shell => b(n) - b(n / 2.0),
            Projection::Fattened => b(2.0 * n) - b(n / 4.0),
        }
    }
}

/// Powers of two covering the eigenfrequencies of a basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLadder {
    pub frequencies: Vec<f64>,
}

impl DyadicLadder {
    /// Smallest ladder whose shells `(N/2, N]` partition `[√μ_1, √μ_n]`.
    pub fn for_basis(basis: &SpectralBasis) -> Self {
        let f = basis.frequencies();
        let lo = f[0].log2().ceil() as i32;
        let hi = f[f.len() - 1].log2().ceil() as i32;
        DyadicLadder { frequencies: (lo..=hi).map(|k| 2f64.powi(k)).collect() }
    }

    pub fn contains(&self, n: f64) -> bool {
        let first = self.frequencies[0];
        let last = self.frequencies[self.frequencies.len() - 1];
        n >= first && n <= last && (n.log2() - n.log2().round()).abs() < 1e-12
    }

    /// Ladder without the lowest and highest octave.
    pub fn interior(&self) -> &[f64] {
        let k = self.frequencies.len();
        if k <= 2 {
            &[]
        } else {
            &self.frequencies[1..k - 1]
        }
    }
}

fn apply_symbol(c: &[C64], basis: &SpectralBasis, f: impl Fn(f64) -> f64) -> Vec<C64> {
    c.iter().zip(basis.eigenvalues()).map(|(z, mu)| z * f(mu.sqrt())).collect()
}

/// Coefficients of the projection of `c`.
pub fn project_coeffs(c: &[C64], n: f64, kind: MultiplierKind, proj: Projection, basis: &SpectralBasis) -> Vec<C64> {
    apply_symbol(c, basis, |xi| kind.symbol(proj, xi, n))
}

pub fn project(
    u: &RadialField,
    n: f64,
    kind: MultiplierKind,
    proj: Projection,
    basis: &SpectralBasis,
) -> Result<RadialField> {
    if !DyadicLadder::for_basis(basis).contains(n) {
        return Err(Error::OutOfRange(n));
    }
    let c = basis.decompose(u)?;
    basis.reconstruct(&project_coeffs(&c, n, kind, proj, basis))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub n: f64,
    pub p: f64,
    pub q: f64,
    pub norm_p: f64,
    pub norm_q: f64,
    /// `‖P_N u‖_q / (N^{d/p − d/q} ‖P_N u‖_p)`
    pub ratio: f64,
}

/// Bernstein ratio of the shell projection `P_N u`.
pub fn bernstein_check(
    u: &RadialField,
    n: f64,
    p: f64,
    q: f64,
    kind: MultiplierKind,
    basis: &SpectralBasis,
) -> Result<BernsteinReport> {
    if !(p >= 1.0 && q >= p) {
        return Err(Error::InvalidParameter(format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    let pn = project(u, n, kind, Projection::Shell, basis)?;
    Ok(shell_bernstein(&pn, n, p, q))
}

/// Bernstein ratio of an already projected shell `pn`.
pub fn shell_bernstein(pn: &RadialField, n: f64, p: f64, q: f64) -> BernsteinReport {
    let d = pn.d() as f64;
    let norm_p = pn.lp_norm(p);
    let norm_q = pn.lp_norm(q);
    let exponent = d / p - if q.is_infinite() { 0.0 } else { d / q };
    let ratio = if norm_p > 0.0 { norm_q / (n.powf(exponent) * norm_p) } else { f64::NAN };
    BernsteinReport { n, p, q, norm_p, norm_q, ratio }
}

/// `‖Δ_h P_N u‖₂ / (N² ‖P_N u‖₂)` for the sharp shell.
pub fn derivative_bernstein(u: &RadialField, n: f64, basis: &SpectralBasis) -> Result<f64> {
    let pn = project(u, n, MultiplierKind::Sharp, Projection::Shell, basis)?;
    let l2 = pn.lp_norm(2.0);
    if l2 == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(pn.h2_norm() / (n * n * l2))
}

fn shell_kinetics(c: &[C64], basis: &SpectralBasis) -> Vec<f64> {
    let ladder = DyadicLadder::for_basis(basis);
    ladder
        .frequencies
        .iter()
        .map(|&n| {
            c.iter()
                .zip(basis.eigenvalues())
                .filter(|(_, mu)| {
                    let xi = mu.sqrt();
                    xi > n / 2.0 && xi <= n
                })
                .map(|(z, mu)| mu * mu * z.norm_sqr())
                .sum::<f64>()
        })
        .collect()
}

/// `sup_N ‖P_N Δ_h u‖₂` over sharp shells.
pub fn besov_sup_norm(u: &RadialField, basis: &SpectralBasis) -> Result<f64> {
    let c = basis.decompose(u)?;
    let best = shell_kinetics(&c, basis).into_iter().fold(0.0, f64::max).sqrt();
    if best == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(best)
}

/// `‖u‖_{2^#} / (‖Δ_h u‖₂^{(d−4)/d} · sup_N ‖P_N Δ_h u‖₂^{4/d})`
pub fn refined_sobolev_check(u: &RadialField, basis: &SpectralBasis) -> Result<f64> {
    let c = basis.decompose(u)?;
    let shells = shell_kinetics(&c, basis);
    let besov = shells.iter().cloned().fold(0.0, f64::max).sqrt();
    if besov == 0.0 {
        return Err(Error::ZeroField);
    }
    let kinetic = basis.spectral_kinetic(&c).sqrt();
    let d = u.d() as f64;
    Ok(u.lp_norm(two_sharp(u.d())) / (kinetic.powf((d - 4.0) / d) * besov.powf(4.0 / d)))
}
