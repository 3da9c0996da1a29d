//! Radial grids, quadrature and the discrete radial Laplacian with its eigenbasis.
//!
//! Nodes sit at `r_j = j h` for `j = 1..n` with `h = r_max/(n+1)`. Each node owns the
//! shell between its two neighbouring midpoints (the first shell reaches down to the
//! origin), and the Laplacian is the flux difference across shell faces divided by the
//! shell volume. With a zero value past the last node this gives a homogeneous Dirichlet
//! wall at `r_max`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    let pi = std::f64::consts::PI;
    // Γ(d/2) for integer d
    let gamma_half = if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = pi.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * pi.powf(d as f64 / 2.0) / gamma_half
}

/// Description of a uniform radial grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub r_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn h(&self) -> f64 {
        self.r_max / (self.n + 1) as f64
    }

    /// Radius of node `j` (one-based).
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }
}

pub fn build_grid(d: usize, r_max: f64, n: usize) -> Result<GridSpec> {
    if d < 5 {
        return Err(Error::InvalidParameter(format!("dimension {d} < 5")));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::InvalidParameter(format!("r_max {r_max} must be positive")));
    }
    if n < 16 {
        return Err(Error::InvalidParameter(format!("n {n} < 16")));
    }
    Ok(GridSpec { d, r_max, n })
}

/// A grid together with its precomputed geometry.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    h: f64,
    r: Vec<f64>,
    weights: Vec<f64>,
    // shell volumes (without the sphere factor) and outer face areas, two ghost nodes included
    vol: Vec<f64>,
    face: Vec<f64>,
    sphere: f64,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Arc<Grid>> {
        let spec = build_grid(spec.d, spec.r_max, spec.n)?;
        let h = spec.h();
        let d = spec.d as i32;
        let m = spec.n + 2;
        let sphere = sphere_area(spec.d);
        let mut vol = Vec::with_capacity(m);
        let mut face = Vec::with_capacity(m);
        for i in 0..m {
            let outer = (i as f64 + 1.5) * h;
            let inner = if i == 0 { 0.0 } else { (i as f64 + 0.5) * h };
            vol.push((outer.powi(d) - inner.powi(d)) / d as f64);
            face.push(outer.powi(d - 1));
        }
        let r = (1..=spec.n).map(|j| j as f64 * h).collect();
        let weights = vol[..spec.n].iter().map(|v| sphere * v).collect();
        Ok(Arc::new(Grid { spec, h, r, weights, vol, face, sphere }))
    }

    pub fn build(d: usize, r_max: f64, n: usize) -> Result<Arc<Grid>> {
        Grid::new(build_grid(d, r_max, n)?)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn d(&self) -> usize {
        self.spec.d
    }
    pub fn n(&self) -> usize {
        self.spec.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }
    pub fn nodes(&self) -> &[f64] {
        &self.r
    }
    /// Quadrature weights: the measure of the shell owned by each node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn sphere(&self) -> f64 {
        self.sphere
    }
    /// Radius of the outer face of the last shell, where the grid quadrature stops.
    pub fn outer_face(&self) -> f64 {
        (self.spec.n as f64 + 0.5) * self.h
    }

    /// `Σ ω_j f_j`; rejects non-finite samples.
    pub fn integrate(&self, density: &[f64]) -> Result<f64> {
        if density.len() != self.spec.n {
            return Err(Error::GridMismatch);
        }
        if density.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("integrand".into()));
        }
        Ok(self.sum(density))
    }

    /// Weighted sum without validation, for inner loops.
    pub fn sum(&self, density: &[f64]) -> f64 {
        density.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Weighted sum restricted to nodes with `lo <= r <= hi`.
    pub fn sum_between(&self, density: &[f64], lo: f64, hi: f64) -> f64 {
        self.r
            .iter()
            .zip(density.iter().zip(&self.weights))
            .filter(|(r, _)| **r >= lo && **r <= hi)
            .map(|(_, (f, w))| f * w)
            .sum()
    }

    fn stencil(&self, v: &[C64], beyond: C64) -> Vec<C64> {
        let m = v.len();
        assert!(m <= self.vol.len(), "stencil beyond precomputed geometry");
        let mut out = Vec::with_capacity(m);
        let ih = 1.0 / self.h;
        for i in 0..m {
            let next = if i + 1 < m { v[i + 1] } else { beyond };
            let up = (next - v[i]) * (self.face[i] * ih);
            let down = if i == 0 { C64::new(0.0, 0.0) } else { (v[i] - v[i - 1]) * (self.face[i - 1] * ih) };
            out.push((up - down) / self.vol[i]);
        }
        out
    }

    /// Discrete Laplacian with the Dirichlet wall.
    pub fn laplacian(&self, u: &[C64]) -> Vec<C64> {
        debug_assert_eq!(u.len(), self.spec.n);
        self.stencil(u, C64::new(0.0, 0.0))
    }

    /// Laplacian at the interior nodes with `exterior` supplying the value at `r_{n+1}`
    /// instead of the wall.
    pub fn laplacian_with_exterior(&self, u: &[C64], exterior: C64) -> Vec<C64> {
        self.stencil(u, exterior)
    }

    /// Square of the Laplacian with two exterior samples `u(r_{n+1}), u(r_{n+2})`.
    pub fn bilaplacian_with_exterior(&self, u: &[C64], exterior: [C64; 2]) -> Vec<C64> {
        let mut ext = u.to_vec();
        ext.push(exterior[0]);
        let first = self.stencil(&ext, exterior[1]);
        let n = self.spec.n;
        self.stencil(&first[..n], first[n])
    }

    /// Centered radial derivative, even reflection at the origin, zero past the wall.
    pub fn gradient(&self, u: &[C64]) -> Vec<C64> {
        let n = u.len();
        let origin = (u[0] * 4.0 - u[1]) / 3.0;
        let s = 0.5 / self.h;
        (0..n)
            .map(|i| {
                let prev = if i == 0 { origin } else { u[i - 1] };
                let next = if i + 1 < n { u[i + 1] } else { C64::new(0.0, 0.0) };
                (next - prev) * s
            })
            .collect()
    }
}

/// Complex samples of a radial function.
#[derive(Clone, Debug)]
pub struct RadialField {
    grid: Arc<Grid>,
    values: Vec<C64>,
}

impl RadialField {
    pub fn new(grid: Arc<Grid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("field samples".into()));
        }
        Ok(RadialField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n();
        RadialField { grid, values: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: Arc<Grid>, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField::new(grid, values)
    }

    pub fn from_real<F: Fn(f64) -> f64>(grid: Arc<Grid>, f: F) -> Result<Self> {
        RadialField::from_fn(grid, |r| C64::new(f(r), 0.0))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }
    pub fn d(&self) -> usize {
        self.grid.d()
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec() == other.grid.spec()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, a: C64) -> RadialField {
        RadialField { grid: self.grid.clone(), values: self.values.iter().map(|z| z * a).collect() }
    }

    pub fn scale_real(&self, a: f64) -> RadialField {
        self.scale(C64::new(a, 0.0))
    }

    pub fn add(&self, other: &RadialField) -> Result<RadialField> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(RadialField { grid: self.grid.clone(), values })
    }

    pub fn sub(&self, other: &RadialField) -> Result<RadialField> {
        self.add(&other.scale_real(-1.0))
    }

    pub fn map<F: Fn(f64, C64) -> C64>(&self, f: F) -> RadialField {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &z)| f(r, z)).collect();
        RadialField { grid: self.grid.clone(), values }
    }

    pub fn laplacian(&self) -> Vec<C64> {
        self.grid.laplacian(&self.values)
    }

    pub fn gradient(&self) -> Vec<C64> {
        self.grid.gradient(&self.values)
    }

    /// `∫|u|²`
    pub fn mass(&self) -> f64 {
        let dens: Vec<f64> = self.values.iter().map(|z| z.norm_sqr()).collect();
        self.grid.sum(&dens)
    }

    /// `‖Δ_h u‖₂`
    pub fn h2_norm(&self) -> f64 {
        let dens: Vec<f64> = self.laplacian().iter().map(|z| z.norm_sqr()).collect();
        self.grid.sum(&dens).sqrt()
    }

    /// `⟨u, v⟩ = ∫ u v̄`
    pub fn inner(&self, other: &RadialField) -> Result<C64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a * b.conj() * *w)
            .sum())
    }

    /// Discrete L^p norm; `p = ∞` is the largest sample modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        let dens: Vec<f64> = self.values.iter().map(|z| z.norm().powf(p)).collect();
        self.grid.sum(&dens).powf(1.0 / p)
    }
}

/// Eigendecomposition of `−Δ_h`, orthonormal in the weighted inner product.
#[derive(Debug)]
pub struct SpectralBasis {
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    sqrt_w: Vec<f64>,
}

/// Builds `−Δ_h` in symmetric form and diagonalizes it.
pub fn radial_laplacian(grid: &Arc<Grid>) -> Result<SpectralBasis> {
    let n = grid.n();
    let h = grid.h;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let down = if i == 0 { 0.0 } else { grid.face[i - 1] };
        m[(i, i)] = (grid.face[i] + down) / (h * grid.vol[i]);
        if i + 1 < n {
            let off = -grid.face[i] / (h * (grid.vol[i] * grid.vol[i + 1]).sqrt());
            m[(i, i + 1)] = off;
            m[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 200 * n).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if eigenvalues.iter().any(|&mu| !(mu > 0.0) || !mu.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let src = eig.eigenvectors.column(k);
        let sign = if src[0] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, col)] = sign * src[i];
        }
    }
    let sqrt_w = grid.weights().iter().map(|w| w.sqrt()).collect();
    Ok(SpectralBasis { grid: grid.clone(), eigenvalues, vectors, sqrt_w })
}

impl SpectralBasis {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Eigenvalues `μ_k` of `−Δ_h`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenfrequencies `√μ_k`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|m| m.sqrt()).collect()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn check(&self, f: &RadialField) -> Result<()> {
        if Arc::ptr_eq(f.grid(), &self.grid) || f.grid().spec() == self.grid.spec() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Coefficients `c_k = ⟨f, φ_k⟩`.
    pub fn decompose(&self, f: &RadialField) -> Result<Vec<C64>> {
        self.check(f)?;
        let n = self.len();
        let mut x = DMatrix::<f64>::zeros(n, 2);
        for (i, z) in f.values().iter().enumerate() {
            x[(i, 0)] = z.re * self.sqrt_w[i];
            x[(i, 1)] = z.im * self.sqrt_w[i];
        }
        let c = self.vectors.tr_mul(&x);
        Ok((0..n).map(|k| C64::new(c[(k, 0)], c[(k, 1)])).collect())
    }

    /// The field `Σ c_k φ_k`.
    pub fn reconstruct(&self, c: &[C64]) -> Result<RadialField> {
        let n = self.len();
        if c.len() != n {
            return Err(Error::GridMismatch);
        }
        let mut x = DMatrix::<f64>::zeros(n, 2);
        for (k, z) in c.iter().enumerate() {
            x[(k, 0)] = z.re;
            x[(k, 1)] = z.im;
        }
        let v = &self.vectors * x;
        let values = (0..n).map(|i| C64::new(v[(i, 0)], v[(i, 1)]) / self.sqrt_w[i]).collect();
        RadialField::new(self.grid.clone(), values)
    }

    /// The `k`-th eigenfunction (zero-based).
    pub fn eigenfunction(&self, k: usize) -> RadialField {
        let values = (0..self.len())
            .map(|i| C64::new(self.vectors[(i, k)] / self.sqrt_w[i], 0.0))
            .collect();
        RadialField::new(self.grid.clone(), values).expect("eigenvector samples are finite")
    }

    /// `Σ μ_k² |c_k|²`
    pub fn spectral_kinetic(&self, c: &[C64]) -> f64 {
        c.iter().zip(&self.eigenvalues).map(|(z, mu)| mu * mu * z.norm_sqr()).sum()
    }
}
