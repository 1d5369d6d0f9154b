mod common;

use std::f64::consts::PI;

use common::*;
use kurzweil::cell::is_pdivision;
use kurzweil::gauge::is_fine;
use kurzweil::integrate::{default_gauge, kh_division, riemann_sum, saks_henstock_indicator};
use kurzweil::{kh_integrate, AdditiveCellFn, Cell, Error, Integrand, TagPolicy};
use proptest::prelude::*;

#[test]
fn sine_period_vanishes() {
    let f = Integrand::new(unit(), |x| (2.0 * PI * x).sin());
    let r = kh_integrate(&f, &unit(), 1e-8).unwrap();
    assert!(r.value.abs() < 1e-8, "{r:?}");
    assert!(r.error_estimate <= 1e-8);
}

#[test]
fn flagship_matches_primitive() {
    let r = kh_integrate(&flagship(), &unit(), 1e-6).unwrap();
    assert!((r.value - 1f64.sin()).abs() < 1e-6, "{r:?}");
    assert!(r.error_estimate >= 0.0 && r.error_estimate <= 1e-6);
}

#[test]
fn inverse_square_root_singularity() {
    let f = Integrand::new(unit(), |x| 0.5 / x.sqrt()).with_singular_points([0.0]).unwrap();
    let r = kh_integrate(&f, &unit(), 1e-8).unwrap();
    assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
}

#[test]
fn reciprocal_does_not_converge() {
    let f = Integrand::new(unit(), |x| 1.0 / x).with_singular_points([0.0]).unwrap();
    match kh_integrate(&f, &unit(), 1e-6) {
        Err(e @ Error::NoConvergence { .. }) => assert!(e.is_numerical()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn interior_singularity() {
    // |x − 1/3|^(-1/2) has integral 2(√(1/3) + √(2/3)).
    let f = Integrand::new(unit(), |x| (x - 1.0 / 3.0).abs().powf(-0.5)).with_singular_points([1.0 / 3.0]).unwrap();
    let r = kh_integrate(&f, &unit(), 1e-7).unwrap();
    let exact = 2.0 * ((1.0f64 / 3.0).sqrt() + (2.0f64 / 3.0).sqrt());
    assert!((r.value - exact).abs() < 1e-7, "{r:?}");
}

#[test]
fn smooth_integrands_agree_with_oracle() {
    for (name, f, exact) in smooth_family() {
        let tol = 1e-9;
        let oracle = simpson(&f, 0.0, 1.0, 1e-13);
        assert!((oracle - exact).abs() < 1e-11, "{name}: oracle {oracle} vs {exact}");
        let r = kh_integrate(&Integrand::new(unit(), f), &unit(), tol).unwrap();
        assert!((r.value - oracle).abs() < 10.0 * tol, "{name}: {} vs {oracle}", r.value);
    }
}

#[test]
fn non_finite_sample_is_reported() {
    let f = Integrand::new(unit(), |x| if x > 0.5 { f64::NAN } else { 1.0 });
    assert!(matches!(kh_integrate(&f, &unit(), 1e-6), Err(Error::NonFiniteSample { .. })));
}

#[test]
fn rejects_non_positive_tolerance() {
    let f = Integrand::constant(unit(), 1.0);
    assert!(kh_integrate(&f, &unit(), 0.0).is_err());
    assert!(kh_integrate(&f, &unit(), -1.0).is_err());
}

#[test]
fn division_is_fine_and_sums_agree() {
    for (f, eps) in [
        (Integrand::new(unit(), |x| (5.0 * x).sin()), 1e-6),
        (Integrand::new(unit(), |x| 0.5 / x.sqrt()).with_singular_points([0.0]).unwrap(), 1e-5),
        (flagship(), 1e-3),
    ] {
        let p = kh_division(&f, &unit(), eps, TagPolicy::MidpointFirst).unwrap();
        assert!(is_pdivision(&p, &unit()));
        assert!(is_fine(&p, &default_gauge(&f, &unit(), eps)));
        let s = riemann_sum(&p, &f).unwrap();
        let e = kh_integrate(&f, &unit(), eps).unwrap();
        assert!((s - e.value).abs() < 4.0 * eps, "{s} vs {}", e.value);
    }
}

fn uniform(n: usize, tag: impl Fn(f64, f64) -> f64) -> kurzweil::PFamily {
    let items = (0..n)
        .map(|k| {
            let c = Cell::new(k as f64 / n as f64, (k + 1) as f64 / n as f64).unwrap();
            kurzweil::TaggedCell::new(c, tag(c.lo(), c.hi()))
        })
        .collect();
    kurzweil::cell::validate_pfamily(items).unwrap()
}

#[test]
fn saks_henstock_indicator_examples() {
    let one = Integrand::constant(unit(), 1.0);
    let id = AdditiveCellFn::from_point_fn(unit(), |x| x);
    assert_eq!(saks_henstock_indicator(&one, &uniform(7, |a, _| a), &id).unwrap(), 0.0);

    let x = Integrand::new(unit(), |x| x);
    let half_sq = AdditiveCellFn::from_point_fn(unit(), |x| x * x / 2.0);
    assert!(saks_henstock_indicator(&x, &uniform(16, |a, b| 0.5 * (a + b)), &half_sq).unwrap() < 1e-15);

    // Left tags on x²: each term misses (h³/3 + x_k·h²), summed in closed form.
    let n = 10;
    let h = 1.0 / n as f64;
    let sq = Integrand::new(unit(), |x| x * x);
    let cube = AdditiveCellFn::from_point_fn(unit(), |x| x * x * x / 3.0);
    let got = saks_henstock_indicator(&sq, &uniform(n, |a, _| a), &cube).unwrap();
    let expected = (0..n).map(|k| h * h * h / 3.0 + k as f64 * h * h * h).sum::<f64>();
    assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
}

#[test]
fn saks_henstock_indicator_shrinks_with_the_mesh() {
    let f = Integrand::new(unit(), |x| (4.0 * x).cos());
    let prim = AdditiveCellFn::from_point_fn(unit(), |x| (4.0 * x).sin() / 4.0);
    let coarse = saks_henstock_indicator(&f, &uniform(50, |a, _| a), &prim).unwrap();
    let fine = saks_henstock_indicator(&f, &uniform(500, |a, _| a), &prim).unwrap();
    assert!(fine < coarse / 5.0);
}

#[test]
fn large_override_on_null_set() {
    let f = Integrand::constant(unit(), 0.0).with_exceptions([(1.0 / 3.0, 1e6), (2.0 / 3.0, 1e6)]).unwrap();
    let r = kh_integrate(&f, &unit(), 1e-6).unwrap();
    assert!(r.value.abs() < 1e-6, "{r:?}");
}

#[test]
fn exceptions_do_not_move_the_integral() {
    let base = Integrand::new(unit(), |x| x * x);
    let moved = base.clone().with_exceptions([(0.25, 1e6), (0.5, -3.0), (1.0, 42.0)]).unwrap();
    let a = kh_integrate(&base, &unit(), 1e-8).unwrap().value;
    let b = kh_integrate(&moved, &unit(), 1e-8).unwrap().value;
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}

fn oscillatory(k: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    move |x: f64| (k * x).sin() + x.cos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linearity(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, k in 1.0..40.0f64) {
        let tol = 1e-8;
        let f = Integrand::new(unit(), oscillatory(k));
        let g = Integrand::new(unit(), |x: f64| 0.5 / x.sqrt()).with_singular_points([0.0]).unwrap();
        let h = f.linear_combination(alpha, &g, beta).unwrap();
        let lhs = kh_integrate(&h, &unit(), tol).unwrap().value;
        let rhs = alpha * kh_integrate(&f, &unit(), tol).unwrap().value + beta * kh_integrate(&g, &unit(), tol).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 3.0 * tol * (1.0 + alpha.abs() + beta.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn restriction_additivity(m in 0.01..0.99f64, k in 1.0..30.0f64) {
        let tol = 1e-8;
        let f = Integrand::new(unit(), oscillatory(k));
        let whole = kh_integrate(&f, &unit(), tol).unwrap().value;
        let (l, r) = unit().split_at(m).unwrap();
        let a = kh_integrate(&f.restrict(l).unwrap(), &l, tol).unwrap().value;
        let b = kh_integrate(&f.restrict(r).unwrap(), &r, tol).unwrap().value;
        prop_assert!((whole - a - b).abs() < 3.0 * tol);
    }

    #[test]
    fn policy_does_not_change_value(k in 1.0..30.0f64) {
        let tol = 1e-8;
        let f = Integrand::new(unit(), oscillatory(k));
        let a = kurzweil::kh_integrate_with(&f, &unit(), tol, &kurzweil::KhOptions { policy: TagPolicy::EndpointFirst, ..Default::default() }).unwrap();
        let b = kh_integrate(&f, &unit(), tol).unwrap();
        prop_assert!((a.value - b.value).abs() < 2.0 * tol);
    }

    #[test]
    fn null_invariance(points in proptest::collection::vec((0.0..1.0f64, -1e3..1e3f64), 1..=8)) {
        let tol = 1e-7;
        let base = Integrand::new(unit(), |x: f64| (3.0 * x).exp() * (7.0 * x).cos());
        let moved = base.clone().with_exceptions(points).unwrap();
        let a = kh_integrate(&base, &unit(), tol).unwrap().value;
        let b = kh_integrate(&moved, &unit(), tol).unwrap().value;
        prop_assert!((a - b).abs() < tol, "{a} vs {b}");
    }
}

#[test]
fn cell_api_is_reexported() {
    let c = Cell::new(-1.0, 2.0).unwrap();
    assert_eq!(c.length(), 3.0);
}
