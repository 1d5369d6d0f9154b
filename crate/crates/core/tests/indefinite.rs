mod common;

use std::f64::consts::PI;

use common::*;
use kurzweil::indefinite::{ae_derivative_check, alexiewicz_norm_with, default_h_schedule, NormOptions};
use kurzweil::{alexiewicz_norm, indefinite_integral, GridSpec, Integrand};
use proptest::prelude::*;

#[test]
fn constant_gives_identity_curve() {
    let c = indefinite_integral(&Integrand::constant(unit(), 1.0), &unit(), &GridSpec::Uniform(64), 1e-10).unwrap();
    assert_eq!(c.values()[0], 0.0);
    for (x, v) in c.grid().iter().zip(c.values()) {
        assert!((x - v).abs() < 1e-12);
    }
}

#[test]
fn sine_curve() {
    let f = Integrand::new(unit(), |x| (2.0 * PI * x).sin());
    let c = indefinite_integral(&f, &unit(), &GridSpec::Uniform(100), 1e-9).unwrap();
    for (x, v) in c.grid().iter().zip(c.values()) {
        let exact = (1.0 - (2.0 * PI * x).cos()) / (2.0 * PI);
        assert!((v - exact).abs() < 1e-9, "at {x}: {v} vs {exact}");
    }
}

#[test]
fn flagship_curve() {
    let c = indefinite_integral(&flagship(), &unit(), &GridSpec::Uniform(32), 1e-6).unwrap();
    for (x, v) in c.grid().iter().zip(c.values()) {
        assert!((v - flagship_primitive(*x)).abs() < 1e-6, "at {x}: {v}");
    }
}

#[test]
fn norm_examples() {
    assert!((alexiewicz_norm(&Integrand::constant(unit(), 1.0), &unit(), 1e-9).unwrap() - 1.0).abs() < 1e-12);
    let s = alexiewicz_norm(&Integrand::new(unit(), |x| (2.0 * PI * x).sin()), &unit(), 1e-8).unwrap();
    assert!((s - 1.0 / PI).abs() < 1e-8, "{s}");
    let z = Integrand::constant(unit(), 0.0).with_exceptions([(0.2, 5.0), (0.9, -1.0)]).unwrap();
    assert!(alexiewicz_norm(&z, &unit(), 1e-8).unwrap() < 1e-8);
}

#[test]
fn norm_found_off_grid() {
    // Max of |∫ cos(2π·3.3x)| sits between grid points of a coarse grid.
    let w = 2.0 * PI * 3.3;
    let f = Integrand::new(unit(), move |x| (w * x).cos());
    let opts = NormOptions {
        initial_panels: 8,
        ..Default::default()
    };
    let n = alexiewicz_norm_with(&f, &unit(), 1e-9, &opts).unwrap();
    assert!((n.value - 1.0 / w).abs() < 1e-9, "{n:?}");
}

#[test]
fn norm_equals_sup_of_curve() {
    let f = Integrand::new(unit(), |x| x - 0.3);
    let n = alexiewicz_norm_with(&f, &unit(), 1e-9, &NormOptions::default()).unwrap();
    let (sup, _) = n.curve.sup_norm();
    assert_eq!(n.value, sup);
    // max(|F(0.6)|, F(1)) with F(x) = x²/2 − 0.3x: F(0.6) = −0.18 < F(1) = 0.2.
    assert!((n.value - 0.2).abs() < 1e-9);
}

#[test]
fn increments_shrink_with_the_mesh() {
    let f = Integrand::new(unit(), |x| 0.5 / x.sqrt()).with_singular_points([0.0]).unwrap();
    let coarse = indefinite_integral(&f, &unit(), &GridSpec::Uniform(16), 1e-8).unwrap().max_increment();
    let fine = indefinite_integral(&f, &unit(), &GridSpec::Uniform(256), 1e-8).unwrap().max_increment();
    assert!(fine < coarse / 3.0, "{coarse} {fine}");
}

#[test]
fn derivative_examples() {
    let one = Integrand::constant(unit(), 1.0);
    let c = indefinite_integral(&one, &unit(), &GridSpec::Uniform(4), 1e-9).unwrap();
    let r = ae_derivative_check(&one, &c, &[0.1, 0.5, 0.9], &default_h_schedule(&unit()), 1e-4);
    assert_eq!(r.converged_fraction, 1.0);
    for s in &r.samples {
        assert!(s.errors.iter().all(|e| e.1 < 1e-9));
    }

    let x = Integrand::new(unit(), |x| x);
    let r = ae_derivative_check(&x, &c, &[0.5], &default_h_schedule(&unit()), 1e-4);
    assert!(r.samples[0].errors.iter().all(|e| e.1 < 1e-9));

    let f = flagship();
    let p = (PI / 2.0 + 10.0 * PI).powf(-0.5);
    let r = ae_derivative_check(&f, &c, &[p], &default_h_schedule(&unit()), 1e-4);
    let s = &r.samples[0];
    assert!((s.f - flagship_fn(p)).abs() < 1e-12);
    assert!(s.converged, "{s:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn homogeneity(alpha in -4.0..4.0f64, k in 1.0..12.0f64) {
        let tol = 1e-8;
        let f = Integrand::new(unit(), move |x: f64| (k * x).sin() + 0.2);
        let a = alexiewicz_norm(&f.scaled(alpha), &unit(), tol).unwrap();
        let b = alexiewicz_norm(&f, &unit(), tol).unwrap();
        prop_assert!((a - alpha.abs() * b).abs() < tol * (1.0 + alpha.abs()));
    }

    #[test]
    fn triangle(k in 1.0..12.0f64, m in -2.0..2.0f64) {
        let tol = 1e-8;
        let f = Integrand::new(unit(), move |x: f64| (k * x).cos());
        let g = Integrand::new(unit(), move |x: f64| m * x - 0.4);
        let sum = f.linear_combination(1.0, &g, 1.0).unwrap();
        let lhs = alexiewicz_norm(&sum, &unit(), tol).unwrap();
        let rhs = alexiewicz_norm(&f, &unit(), tol).unwrap() + alexiewicz_norm(&g, &unit(), tol).unwrap();
        prop_assert!(lhs <= rhs + tol);
    }
}
