mod common;

use bhnls::diagnostics::frequency_scale;
use bhnls::harness::data::gaussian;
use bhnls::propagator::linear_step;
use bhnls::symmetry::*;
use bhnls::{radial_laplacian, Error, Grid, RadialField, C64};
use common::*;

fn kinetic(u: &RadialField) -> f64 {
    u.h2_norm().powi(2)
}

#[test]
fn identity_is_exact() {
    let b = small_basis(5);
    let u = random_field(b.grid(), 1);
    let v = apply(&GroupElement::identity(), &u, b.grid()).unwrap();
    assert_eq!(v.values(), u.values());
}

#[test]
fn invalid_scale_is_rejected() {
    assert!(matches!(GroupElement::new(0.0, 0.0), Err(Error::InvalidParameter(_))));
    assert!(matches!(GroupElement::new(0.0, f64::INFINITY), Err(Error::InvalidParameter(_))));
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.0, 1.0).unwrap();
    assert!(apply(&GroupElement::scaling(-1.0), &u, b.grid()).is_err());
}

#[test]
fn phase_acts_pointwise() {
    let b = small_basis(6);
    let u = smooth_field(b.grid(), 2);
    let v = apply(&GroupElement::new(1.3, 1.0).unwrap(), &u, b.grid()).unwrap();
    assert!(rel_l2(&v, &u.scale(C64::from_polar(1.0, 1.3))) < 1e-15);
}

#[test]
fn scaling_preserves_kinetic_energy() {
    let g = Grid::build(5, 40.0, 1599).unwrap();
    let u = gaussian(&g, 2.0, 1.0).unwrap();
    for lam in [0.5, 0.8, 1.5, 2.0] {
        let v = apply(&GroupElement::scaling(lam), &u, &g).unwrap();
        assert!((kinetic(&v) / kinetic(&u) - 1.0).abs() < 1e-3, "λ {lam}");
        let ratio = v.lp_norm(10.0) / u.lp_norm(10.0);
        assert!((ratio - 1.0).abs() < 1e-3, "λ {lam}: {ratio}");
    }
}

#[test]
fn scaling_matches_closed_form() {
    let g = Grid::build(6, 20.0, 399).unwrap();
    let u = gaussian(&g, 1.5, 1.0).unwrap();
    let lam = 1.7;
    let v = apply(&GroupElement::new(0.2, lam).unwrap(), &u, &g).unwrap();
    let w = 1.5 * lam;
    let expect = RadialField::from_fn(g.clone(), |r| C64::from_polar(lam.powf(-1.0) * (-r * r / (2.0 * w * w)).exp(), 0.2)).unwrap();
    assert!(rel_l2(&v, &expect) < 1e-6);
}

#[test]
fn composition_is_a_homomorphism() {
    let g = Grid::build(5, 40.0, 799).unwrap();
    let u = gaussian(&g, 2.0, 1.0).unwrap();
    let a = GroupElement::new(0.4, 1.3).unwrap();
    let c = GroupElement::new(-1.1, 0.7).unwrap();
    let two = apply(&a, &apply(&c, &u, &g).unwrap(), &g).unwrap();
    let one = apply(&a.compose(&c), &u, &g).unwrap();
    assert!(rel_l2(&two, &one) < 1e-5);
    assert_eq!(a.compose(&GroupElement::identity()), a);
}

#[test]
fn mass_leaving_the_target_is_an_error() {
    let g = Grid::build(5, 10.0, 99).unwrap();
    let u = gaussian(&g, 2.0, 1.0).unwrap();
    assert!(matches!(apply(&GroupElement::scaling(4.0), &u, &g), Err(Error::SupportOverflow(_))));
}

#[test]
fn enlarged_without_flow_is_plain_apply() {
    let b = small_basis(5);
    let u = smooth_field(b.grid(), 3);
    let base = GroupElement::new(0.5, 0.9).unwrap();
    let a = apply_enlarged(&EnlargedElement::new(base, 0.0), &u, &b).unwrap();
    let c = apply(&base, &u, b.grid()).unwrap();
    assert_eq!(a.values(), c.values());
    assert!(apply_enlarged_to(&EnlargedElement::new(base, 0.1), &u, None, b.grid()).is_err());
}

#[test]
fn enlarged_element_flows_then_transforms() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.0, 1.0).unwrap();
    let el = EnlargedElement::new(GroupElement::new(0.3, 1.0).unwrap(), 0.2);
    let a = apply_enlarged(&el, &u, &b).unwrap();
    let c = linear_step(&u, 0.2, &b).unwrap().scale(C64::from_polar(1.0, 0.3));
    assert!(rel_l2(&a, &c) < 1e-14);
    assert!((kinetic(&a) / kinetic(&u) - 1.0).abs() < 1e-10);
}

#[test]
fn normalization_brings_scale_to_one() {
    let g = Grid::build(5, 40.0, 799).unwrap();
    let b = radial_laplacian(&g).unwrap();
    let u = gaussian(&g, 2.5, 1.0).unwrap();
    let v = normalize(&u, &b, 0.1).unwrap();
    let n = frequency_scale(&v, &b, 0.1).unwrap();
    assert!((n - 1.0).abs() < 0.1, "{n}");
    assert!(matches!(normalize(&RadialField::zeros(g.clone()), &b, 0.1), Err(Error::ZeroField)));
    assert!(matches!(normalize_snapshot(&u, 0.0, &b), Err(Error::InvalidParameter(_))));
}

#[test]
fn divergence_examples() {
    let id = EnlargedElement::new(GroupElement::identity(), 0.0);
    assert_eq!(divergence(&id, &id), 2.0);
    let s = EnlargedElement::new(GroupElement::scaling(4.0), 0.0);
    assert_eq!(divergence(&id, &s), 4.25);
    assert_eq!(divergence(&s, &id), divergence(&id, &s));
    let t = EnlargedElement::new(GroupElement::identity(), 3.0);
    assert_eq!(divergence(&id, &t), 5.0);
}

#[test]
fn identical_sequences_are_not_applicable() {
    let b = small_basis(5);
    let u = gaussian(b.grid(), 1.0, 1.0).unwrap();
    let seq: Vec<EnlargedElement> =
        (0..4).map(|k| EnlargedElement::new(GroupElement::scaling(2f64.powi(k)), 0.0)).collect();
    let rep = decoupling_check(&seq, &seq, &u, &u, None, None, b.grid()).unwrap();
    assert!(!rep.applicable);
    assert!(rep.pairing.is_empty());
    assert!(decoupling_check(&seq, &seq[..2], &u, &u, None, None, b.grid()).is_err());
}

#[test]
fn diverging_scales_decouple() {
    let src = Grid::build(5, 12.0, 599).unwrap();
    let target = Grid::build(5, 120.0, 2399).unwrap();
    let f = gaussian(&src, 1.0, 1.0).unwrap();
    let fixed: Vec<EnlargedElement> = (0..4).map(|_| EnlargedElement::new(GroupElement::identity(), 0.0)).collect();
    let moving: Vec<EnlargedElement> =
        (0..4).map(|k| EnlargedElement::new(GroupElement::scaling(2f64.powi(k)), 0.0)).collect();
    let rep = decoupling_check(&fixed, &moving, &f, &f, None, None, &target).unwrap();
    assert!(rep.applicable);
    assert!(rep.monotone, "{:?}", rep.pairing);
    assert!(rep.terminal_decay > 4.0, "{}", rep.terminal_decay);
}

#[test]
fn single_profile_has_no_defect() {
    let b = small_basis(5);
    let phi = gaussian(b.grid(), 1.0, 1.0).unwrap();
    let zero = RadialField::zeros(b.grid().clone());
    let el = EnlargedElement::new(GroupElement::identity(), 0.0);
    let rep = kinetic_decoupling_check(&[(el, phi.clone())], &zero, &[None]).unwrap();
    assert!(rep.defect.abs() < 1e-12 * rep.total_kinetic);
    assert!((rep.profile_kinetic[0] - kinetic(&phi)).abs() < 1e-12 * rep.total_kinetic);
}

#[test]
fn identical_profiles_double_the_kinetic() {
    let b = small_basis(5);
    let phi = gaussian(b.grid(), 1.0, 1.0).unwrap();
    let zero = RadialField::zeros(b.grid().clone());
    let el = EnlargedElement::new(GroupElement::identity(), 0.0);
    let rep = kinetic_decoupling_check(&[(el, phi.clone()), (el, phi.clone())], &zero, &[None, None]).unwrap();
    assert!((rep.defect / (2.0 * kinetic(&phi)) - 1.0).abs() < 1e-12);
    assert!((rep.defect - rep.cross_sum).abs() < 1e-10 * rep.total_kinetic);
    assert!(kinetic_decoupling_check(&[(el, phi)], &zero, &[]).is_err());
}

#[test]
fn defect_equals_cross_terms() {
    let b = small_basis(6);
    let w = smooth_field(b.grid(), 4);
    let a = gaussian(b.grid(), 0.8, 1.0).unwrap();
    let c = gaussian(b.grid(), 1.2, 0.5).unwrap();
    let profiles = [
        (EnlargedElement::new(GroupElement::new(0.4, 1.0).unwrap(), 0.05), a),
        (EnlargedElement::new(GroupElement::new(0.0, 1.5).unwrap(), 0.0), c),
    ];
    let rep = kinetic_decoupling_check(&profiles, &w, &[Some(&b), None]).unwrap();
    assert!((rep.defect - rep.cross_sum).abs() < 1e-10 * rep.total_kinetic, "{rep:?}");
}
