mod common;

use bhnls::diagnostics::*;
use bhnls::harness::data::gaussian;
use bhnls::propagator::{evolve, SolverConfig};
use bhnls::{Error, Grid, RadialField, C64};
use common::*;

fn gauss(d: usize, r_max: f64, n: usize, width: f64, amp: f64) -> RadialField {
    let g = Grid::build(d, r_max, n).unwrap();
    gaussian(&g, width, amp).unwrap()
}

#[test]
fn zero_field_energy() {
    let e = energy(&RadialField::zeros(Grid::build(5, 10.0, 50).unwrap())).unwrap();
    assert_eq!((e.mass, e.kinetic, e.potential, e.energy), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn gaussian_energy_against_oracle() {
    let d = 5;
    let u = gauss(d, 12.0, 1199, std::f64::consts::FRAC_1_SQRT_2, 0.7);
    let e = energy(&u).unwrap();
    let mass = radial_integral(d, |r| 0.49 * (-2.0 * r * r).exp(), 12.0, 1e-12);
    let kin = radial_integral(d, |r| 0.49 * (4.0 * r * r - 2.0 * d as f64).powi(2) * (-2.0 * r * r).exp(), 12.0, 1e-12);
    let pot = radial_integral(d, |r| 0.7f64.powi(10) * (-10.0 * r * r).exp(), 12.0, 1e-12);
    assert!((e.mass / mass - 1.0).abs() < 1e-3);
    assert!((e.kinetic / kin - 1.0).abs() < 1e-3);
    assert!((e.potential / pot - 1.0).abs() < 1e-3, "{} vs {pot}", e.potential);
    assert!((e.energy - (0.5 * kin - 0.1 * pot)).abs() < 1e-3 * kin);
}

#[test]
fn energy_is_phase_invariant() {
    let b = small_basis(6);
    let u = smooth_field(b.grid(), 4);
    let v = u.scale(C64::from_polar(1.0, 2.1));
    let (a, c) = (energy(&u).unwrap(), energy(&v).unwrap());
    assert!((a.energy - c.energy).abs() < 1e-12 * a.kinetic);
    assert!((a.mass - c.mass).abs() < 1e-12 * a.mass);
}

#[test]
fn scattering_increment_examples() {
    assert_eq!(scattering_exponent(5), 18.0);
    assert_eq!(scattering_exponent(8), 6.0);
    let g = Grid::build(5, 10.0, 99).unwrap();
    assert_eq!(scattering_increment(&RadialField::zeros(g.clone()), 0.1).unwrap(), 0.0);
    let one = RadialField::from_real(g.clone(), |_| 1.0).unwrap();
    let vol = g.integrate(&vec![1.0; 99]).unwrap();
    assert!((scattering_increment(&one, 0.25).unwrap() - 0.25 * vol).abs() < 1e-12 * vol);
    assert!(matches!(scattering_increment(&one, 0.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn cutoff_shape() {
    let c = Cutoff;
    for i in 0..=400 {
        let x = i as f64 * 0.01;
        let p = c.phi(x);
        assert!((0.0..=1.0).contains(&p));
        if x <= 1.0 {
            assert_eq!(p, 1.0);
        }
        if x >= 2.0 {
            assert_eq!(p, 0.0);
        }
    }
    for i in 1..100 {
        let x = 1.0 + i as f64 * 0.01;
        assert!(c.phi(x + 0.005) <= c.phi(x));
        let h = 1e-5;
        assert!((c.d1(x) - (c.phi(x + h) - c.phi(x - h)) / (2.0 * h)).abs() < 1e-6);
        assert!((c.d2(x) - (c.d1(x + h) - c.d1(x - h)) / (2.0 * h)).abs() < 1e-5);
        assert!((c.d3(x) - (c.d2(x + h) - c.d2(x - h)) / (2.0 * h)).abs() < 1e-4);
    }
}

#[test]
fn localized_mass_limits() {
    let u = gauss(5, 20.0, 399, 1.0, 1.0);
    let m = u.mass();
    let c = Cutoff;
    assert!((localized_mass(&u, 15.0, &c).unwrap() / m - 1.0).abs() < 1e-12);
    assert!(localized_mass(&u, 1e-3, &c).unwrap() < 1e-12 * m);
    let mut prev = 0.0;
    for i in 1..40 {
        let v = localized_mass(&u, 0.25 * i as f64, &c).unwrap();
        assert!(v >= prev);
        prev = v;
    }
    assert!(matches!(localized_mass(&u, 0.0, &c), Err(Error::InvalidParameter(_))));
}

#[test]
fn real_fields_have_no_flux() {
    let u = gauss(5, 20.0, 399, 1.3, 0.8);
    let c = Cutoff;
    for r in [0.5, 2.0, 5.0] {
        assert_eq!(virial_z(&u, r, &c).unwrap(), 0.0);
        assert_eq!(localized_mass_derivative(&u, r, &c).unwrap(), 0.0);
    }
    let w = u.scale(C64::from_polar(1.0, 0.7));
    assert!(virial_z(&w, 2.0, &c).unwrap().abs() < 1e-14);
}

#[test]
fn mass_rate_matches_finite_difference() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.0, 0.05).unwrap();
    let dt = 1e-4;
    let mut cfg = SolverConfig::new(dt, 4.0 * dt);
    cfg.snapshot_every = 1;
    let tr = evolve(&u, &cfg, &b).unwrap();
    let c = Cutoff;
    let radius = 1.5;
    let mid = &tr.snapshots[2];
    let fd = (localized_mass(&tr.snapshots[3], radius, &c).unwrap() - localized_mass(&tr.snapshots[1], radius, &c).unwrap())
        / (2.0 * dt);
    let rate = localized_mass_derivative(mid, radius, &c).unwrap();
    assert!((rate - fd).abs() < 0.05 * fd.abs(), "{rate} vs {fd}");
}

#[test]
fn virial_budget_vanishes_off_support() {
    let g = Grid::build(5, 20.0, 399).unwrap();
    let bump = |r: f64| if r < 3.0 { (1.0 - (r / 3.0).powi(2)).powi(4) } else { 0.0 };
    let u = RadialField::from_real(g.clone(), bump).unwrap();
    let c = Cutoff;
    assert_eq!(virial_error_budget(&u, 4.0, &c).unwrap(), 0.0);
    assert!(virial_error_budget(&u, 2.0, &c).unwrap() > 0.0);
    assert_eq!(tail_kinetic(&u, 25.0).unwrap(), 0.0);
    let main = virial_main_term(&u, 4.0).unwrap();
    let e = energy(&u).unwrap();
    assert!((main - 4.0 * (e.kinetic - e.potential)).abs() < 1e-10 * e.kinetic);
}

#[test]
fn tail_kinetic_decreases_in_radius() {
    let u = gauss(6, 20.0, 399, 1.5, 1.0);
    let mut prev = f64::INFINITY;
    for i in 1..30 {
        let t = tail_kinetic(&u, 0.5 * i as f64).unwrap();
        assert!(t <= prev && t >= 0.0);
        prev = t;
    }
}

#[test]
fn frequency_scale_of_a_mode() {
    let b = small_basis(5);
    for k in [0, 5, 40] {
        let phi = b.eigenfunction(k);
        let n = frequency_scale(&phi, &b, 0.1).unwrap();
        assert!((n - b.eigenvalues()[k].sqrt()).abs() < 1e-12);
    }
    let zero = RadialField::zeros(b.grid().clone());
    assert!(matches!(frequency_scale(&zero, &b, 0.1), Err(Error::ZeroField)));
    assert!(matches!(frequency_scale(&b.eigenfunction(0), &b, 1.5), Err(Error::InvalidParameter(_))));
}

#[test]
fn frequency_scale_tracks_scaling() {
    let b = bhnls::radial_laplacian(&Grid::build(5, 30.0, 599).unwrap()).unwrap();
    let wide = gaussian(b.grid(), 2.0, 1.0).unwrap();
    let narrow = gaussian(b.grid(), 1.0, 1.0).unwrap();
    let ratio = frequency_scale(&narrow, &b, 0.1).unwrap() / frequency_scale(&wide, &b, 0.1).unwrap();
    assert!((ratio - 2.0).abs() < 0.15, "{ratio}");
}

#[test]
fn hardy_terms_obey_rellich() {
    let d = 7;
    let u = gauss(d, 15.0, 1499, 1.2, 1.0);
    let (hu, hg) = hardy_terms(&u);
    assert!(hu >= 0.0 && hg >= 0.0);
    let kin = energy(&u).unwrap().kinetic;
    let rellich = (d as f64 * (d as f64 - 4.0) / 4.0).powi(2);
    assert!(kin >= rellich * hu * 0.99, "{kin} vs {}", rellich * hu);
    let oracle = radial_integral(d, |r| if r > 0.0 { (-r * r / 1.44).exp() / r.powi(4) } else { 0.0 }, 15.0, 1e-10);
    assert!((hu / oracle - 1.0).abs() < 2e-2, "{hu} vs {oracle}");
}

#[test]
fn scattering_size_accumulates() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.5, 0.5).unwrap();
    let tr = evolve(&u, &SolverConfig::new(1e-3, 0.05), &b).unwrap();
    assert_eq!(tr.diagnostics[0].s_accum, 0.0);
    assert!(tr.diagnostics.windows(2).all(|w| w[1].s_accum > w[0].s_accum));
}
