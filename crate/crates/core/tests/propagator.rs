mod common;

use bhnls::ground_state::{eval_w_windowed, GroundStateParams};
use bhnls::harness::data::gaussian;
use bhnls::propagator::*;
use bhnls::{Error, Grid, RadialField, C64};
use common::*;

#[test]
fn eigenfunction_picks_up_phase() {
    let b = small_basis(5);
    let k = 7;
    let phi = b.eigenfunction(k);
    let t = 0.37;
    let out = linear_step(&phi, t, &b).unwrap();
    let mu = b.eigenvalues()[k];
    let expect = phi.scale(C64::from_polar(1.0, t * mu * mu));
    assert!(rel_l2(&out, &expect) < 1e-12);
}

#[test]
fn linear_flow_conserves_mass_and_kinetic() {
    let b = small_basis(6);
    let u = random_field(b.grid(), 3);
    let c0 = b.decompose(&u).unwrap();
    for t in [1e-3, 0.5, 17.0] {
        let v = linear_step(&u, t, &b).unwrap();
        let c = b.decompose(&v).unwrap();
        assert!((v.mass() / u.mass() - 1.0).abs() < 1e-12);
        assert!((b.spectral_kinetic(&c) / b.spectral_kinetic(&c0) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn linear_group_law() {
    let b = small_basis(5);
    let u = smooth_field(b.grid(), 9);
    let two = linear_step(&linear_step(&u, 0.2, &b).unwrap(), 0.3, &b).unwrap();
    let one = linear_step(&u, 0.5, &b).unwrap();
    assert!(rel_l2(&two, &one) < 1e-12);
}

#[test]
fn linear_step_rejects_other_grids() {
    let b = small_basis(5);
    let u = RadialField::zeros(Grid::build(5, 10.0, 159).unwrap());
    assert!(matches!(linear_step(&u, 0.1, &b), Err(Error::GridMismatch)));
}

#[test]
fn nonlinear_step_examples() {
    let g = Grid::build(5, 10.0, 20).unwrap();
    let one = RadialField::from_real(g.clone(), |_| 1.0).unwrap();
    let tau = 0.8;
    let out = nonlinear_step(&one, tau, 5).unwrap();
    for z in out.values() {
        assert!((z - C64::from_polar(1.0, -tau)).norm() < 1e-15);
    }
    let zero = RadialField::zeros(g.clone());
    assert!(nonlinear_step(&zero, 3.0, 5).unwrap().values().iter().all(|z| z.norm() == 0.0));

    let u = random_field(&g, 5);
    let v = nonlinear_step(&u, 2.5, 5).unwrap();
    for (a, b) in u.values().iter().zip(v.values()) {
        assert!((a.norm() - b.norm()).abs() < 1e-14);
    }
}

#[test]
fn nonlinear_overflow_is_an_error() {
    let g = Grid::build(5, 10.0, 20).unwrap();
    let big = RadialField::from_real(g, |_| 100.0).unwrap();
    assert!(matches!(nonlinear_step_limited(&big, 0.1, 5, 1e3), Err(Error::Overflow(_))));
}

#[test]
fn config_validation() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.0, 0.01).unwrap();
    for cfg in [SolverConfig::new(0.0, 1.0), SolverConfig::new(1e-2, -1.0)] {
        assert!(matches!(evolve(&u, &cfg, &b), Err(Error::InvalidParameter(_))));
    }
    let mut cfg = SolverConfig::new(1e-2, 0.1);
    cfg.guards.energy_drift = 0.0;
    assert!(matches!(evolve(&u, &cfg, &b), Err(Error::InvalidParameter(_))));
}

#[test]
fn trajectory_shape() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.5, 0.05).unwrap();
    let mut cfg = SolverConfig::new(1e-3, 0.05);
    cfg.snapshot_every = 10;
    let tr = evolve(&u, &cfg, &b).unwrap();
    assert!(tr.guard_free());
    assert_eq!(tr.diagnostics.len(), cfg.steps() + 1);
    assert_eq!(tr.times.len(), tr.diagnostics.len());
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(tr.snapshots.len(), 6);
    assert_eq!(*tr.snapshot_times.last().unwrap(), *tr.times.last().unwrap());
    assert!(tr.diagnostics.windows(2).all(|w| w[1].s_accum >= w[0].s_accum));
}

#[test]
fn conservation_on_small_data() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 2.0, 0.05).unwrap();
    let tr = evolve(&u, &SolverConfig::new(1e-3, 0.2), &b).unwrap();
    assert!(tr.guard_free());
    assert!(tr.energy_drift() < 1e-6, "{}", tr.energy_drift());
    assert!(tr.mass_drift() < 1e-8, "{}", tr.mass_drift());
}

#[test]
fn phase_equivariance() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.5, 0.3).unwrap();
    let ph = C64::from_polar(1.0, 0.9);
    let cfg = SolverConfig::new(1e-3, 0.05);
    let a = evolve(&u, &cfg, &b).unwrap().final_field;
    let c = evolve(&u.scale(ph), &cfg, &b).unwrap().final_field;
    assert!(rel_l2(&c, &a.scale(ph)) < 1e-12);
}

#[test]
fn strang_is_second_order() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.5, 0.8).unwrap();
    let finals: Vec<RadialField> =
        [1e-3, 5e-4, 2.5e-4].iter().map(|&dt| evolve(&u, &SolverConfig::new(dt, 0.2), &b).unwrap().final_field).collect();
    let e1 = finals[0].sub(&finals[1]).unwrap().mass().sqrt();
    let e2 = finals[1].sub(&finals[2]).unwrap().mass().sqrt();
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.3, "order {order}");
}

#[test]
fn scaling_symmetry_of_the_flow() {
    let d = 6;
    let fine = Grid::build(d, 24.0, 479).unwrap();
    let basis = bhnls::radial_laplacian(&fine).unwrap();
    let u0 = gaussian(&fine, 1.5, 0.6).unwrap();
    let lam = 0.5f64;
    let scaled = bhnls::symmetry::apply(&bhnls::symmetry::GroupElement::scaling(lam), &u0, &fine).unwrap();
    let t = 0.08;
    let a = evolve(&u0, &SolverConfig::new(1e-3, t), &basis).unwrap().final_field;
    let b = evolve(&scaled, &SolverConfig::new(1e-3 * lam.powi(4), t * lam.powi(4)), &basis).unwrap().final_field;
    let a_scaled = bhnls::symmetry::apply(&bhnls::symmetry::GroupElement::scaling(lam), &a, &fine).unwrap();
    let err = b.sub(&a_scaled).unwrap().h2_norm() / a_scaled.h2_norm();
    assert!(err < 2e-2, "{err}");
}

#[test]
fn zero_perturbation_gives_zero_difference() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.5, 0.2).unwrap();
    let rep = stability_experiment(&u, &RadialField::zeros(b.grid().clone()), &SolverConfig::new(1e-3, 0.05), &b).unwrap();
    assert_eq!(rep.sup_difference, 0.0);
    assert_eq!(rep.ratio, 0.0);
    assert_eq!(rep.compared_steps, 51);
}

#[test]
fn smaller_perturbations_give_smaller_differences() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.5, 0.5).unwrap();
    let bump = gaussian(b.grid(), 2.5, 0.02).unwrap();
    let cfg = SolverConfig::new(2e-3, 0.2);
    let sups: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&s| stability_experiment(&u, &bump.scale_real(s), &cfg, &b).unwrap().sup_difference)
        .collect();
    assert!(sups[0] > sups[1] && sups[1] > sups[2], "{sups:?}");
}

#[test]
fn perturbed_ground_state_stays_guard_free() {
    let g = Grid::build(8, 30.0, 300).unwrap();
    let b = bhnls::radial_laplacian(&g).unwrap();
    let w = eval_w_windowed(&GroundStateParams::new(8, 0.0, 0.3).unwrap(), &g, 15.0).unwrap();
    let rep = stability_experiment(&w, &w.scale_real(-0.05), &SolverConfig::new(1e-3, 1.0), &b).unwrap();
    assert!(rep.base_guard.is_none() && rep.perturbed_guard.is_none(), "{rep:?}");
}

#[test]
fn non_finite_initial_data_is_rejected_by_construction() {
    let g = Grid::build(5, 10.0, 20).unwrap();
    assert!(matches!(RadialField::new(g, vec![C64::new(f64::NAN, 0.0); 20]), Err(Error::NonFinite(_))));
}
