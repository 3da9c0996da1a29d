#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use bhnls::{Grid, RadialField, SpectralBasis, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || delta.abs() <= 1e-14 * (left + right).abs() {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    // 64 fixed panels, each refined adaptively
    let panels = 64;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let m = 0.5 * (lo + hi);
            let (fa, fm, fb) = (f(lo), f(m), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 40)
        })
        .sum()
}

pub fn gamma_half_integer(twice: usize) -> f64 {
    // Γ(twice/2)
    if twice % 2 == 0 {
        (1..twice / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x + 1.0 <= twice as f64 / 2.0 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

pub fn unit_sphere(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// Radial integral `∫_{|x|<b} f(|x|) dx` by the oracle.
pub fn radial_integral<F: Fn(f64) -> f64>(d: usize, f: F, b: f64, tol: f64) -> f64 {
    let s = unit_sphere(d);
    simpson(|r| s * r.powi(d as i32 - 1) * f(r), 0.0, b, tol)
}

/// The ground state `(d(d−4)(d²−4))^{(d−4)/8} (1 + r²)^{−(d−4)/2}`.
pub fn ground_state(d: usize, r: f64) -> f64 {
    let d = d as f64;
    (d * (d - 4.0) * (d * d - 4.0)).powf((d - 4.0) / 8.0) * (1.0 + r * r).powf(-(d - 4.0) / 2.0)
}

/// Radial Laplacian `f'' + (d−1)f'/r` by central differences of a closed form.
pub fn radial_laplacian_fd<F: Fn(f64) -> f64>(d: usize, f: F, r: f64) -> f64 {
    let e = 1e-4 * r.max(1.0);
    let d2 = (f(r + e) - 2.0 * f(r) + f(r - e)) / (e * e);
    let d1 = (f(r + e) - f(r - e)) / (2.0 * e);
    d2 + (d as f64 - 1.0) * d1 / r
}

pub fn random_field(grid: &Arc<Grid>, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = grid.r_max();
    let values = grid
        .nodes()
        .iter()
        .map(|&r| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-(r / (0.3 * r_max)).powi(2)).exp())
        .collect();
    RadialField::new(grid.clone(), values).unwrap()
}

pub fn smooth_field(grid: &Arc<Grid>, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(C64, f64)> =
        (0..3).map(|_| (C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), rng.gen_range(0.8..2.5))).collect();
    RadialField::from_fn(grid.clone(), |r| terms.iter().map(|&(a, s)| a * (-r * r / (2.0 * s * s)).exp()).sum()).unwrap()
}

pub fn rel_l2(a: &RadialField, b: &RadialField) -> f64 {
    a.sub(b).unwrap().mass().sqrt() / b.mass().sqrt()
}

pub fn coeff_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn small_basis(d: usize) -> SpectralBasis {
    bhnls::radial_laplacian(&Grid::build(d, 16.0, 159).unwrap()).unwrap()
}

/// Closed-form radial Laplacian of [`ground_state`], `−(d−4)c(1+r²)^{−d/2}(d + 2r²)`.
pub fn ground_state_laplacian(d: usize, r: f64) -> f64 {
    let df = d as f64;
    let c = (df * (df - 4.0) * (df * df - 4.0)).powf((df - 4.0) / 8.0);
    -(df - 4.0) * c * (1.0 + r * r).powf(-df / 2.0) * (df + 2.0 * r * r)
}

/// `∫_{|x|>a} f(|x|) dx` through `r = a/t`.
pub fn radial_tail<F: Fn(f64) -> f64>(d: usize, f: F, a: f64, tol: f64) -> f64 {
    let s = unit_sphere(d);
    simpson(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let r = a / t;
            let v = s * r.powi(d as i32 - 1) * f(r) * a / (t * t);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}
