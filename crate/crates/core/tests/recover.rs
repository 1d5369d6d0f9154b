mod common;

use std::time::Instant;

use common::*;
use kurzweil::recover::{default_probes, interpolated_map};
use kurzweil::transport::maps::*;
use kurzweil::{recover_sigma_phi, verify_recovery, BiACMap, BlackBoxOperator, Error, GridSpec, Integrand, Recovery, SignFlag};

const GRID: GridSpec = GridSpec::Uniform(256);

fn hidden() -> Vec<BiACMap> {
    vec![square(), exp_map(), piecewise_affine_default()]
}

#[test]
fn recovers_sign_and_map_on_the_grid() {
    for phi in hidden() {
        for sigma in [SignFlag::PLUS, SignFlag::MINUS] {
            let t = BlackBoxOperator::transport(&phi, sigma);
            let r = recover_sigma_phi(&t, &GRID, 1e-8).unwrap();
            assert_eq!(r.sigma, sigma, "{}", phi.name());
            // Declared singular points of T(1) join the uniform grid.
            assert!((0..=256).all(|k| r.grid.contains(&(k as f64 / 256.0))));
            let err = r.grid.iter().zip(&r.phi).map(|(&x, &p)| (p - phi.forward(x)).abs()).fold(0.0, f64::max);
            assert!(err < 1e-7, "{} {sigma}: {err:e}", phi.name());
        }
    }
}

#[test]
fn identity_and_square_examples() {
    let id = BlackBoxOperator::transport(&identity(unit()), SignFlag::PLUS);
    let r = recover_sigma_phi(&id, &GridSpec::Uniform(8), 1e-10).unwrap();
    assert_eq!(r.sigma, SignFlag::PLUS);
    for (x, p) in r.grid.iter().zip(&r.phi) {
        assert!((x - p).abs() < 1e-12);
    }
    let t = BlackBoxOperator::transport(&square(), SignFlag::MINUS);
    let r = recover_sigma_phi(&t, &GridSpec::Uniform(8), 1e-10).unwrap();
    assert!((r.total + 1.0).abs() < 1e-10);
    assert!((r.phi[4] - 0.25).abs() < 1e-10);
}

#[test]
fn verify_passes_on_model_operators() {
    let tol = 1e-5;
    for phi in hidden() {
        for sigma in [SignFlag::PLUS, SignFlag::MINUS] {
            let t = BlackBoxOperator::transport(&phi, sigma);
            let r = recover_sigma_phi(&t, &GRID, 1e-8).unwrap();
            let start = Instant::now();
            let v = verify_recovery(&t, &r, &default_probes(unit()), tol).unwrap();
            assert!(v.pass, "{} {sigma}: {v:#?}", phi.name());
            assert!(start.elapsed().as_secs() < 30, "{:?}", start.elapsed());
        }
    }
}

#[test]
fn perturbed_operator_is_rejected() {
    let t = BlackBoxOperator::transport(&square(), SignFlag::MINUS);
    let bumped = t.perturbed(Integrand::constant(unit(), 0.1)).unwrap();
    // Against the true map: every probe is off by the perturbation's norm.
    let grid: Vec<f64> = (0..=256).map(|k| k as f64 / 256.0).collect();
    let phi: Vec<f64> = grid.iter().map(|x| x * x).collect();
    let truth = Recovery {
        sigma: SignFlag::MINUS,
        phi,
        grid,
        total: -1.0,
        breaks: vec![0.0],
    };
    let v = verify_recovery(&bumped, &truth, &default_probes(unit()), 1e-5).unwrap();
    assert!(!v.pass);
    for p in &v.probes {
        let a = p.agreement.unwrap();
        assert!((a - 0.1).abs() < 1e-3, "{p:?}");
    }
    assert!(v.linearity.iter().all(|d| (d - 0.1).abs() < 1e-3), "{:?}", v.linearity);
    // And through recovery: the map picks up the drift and misses the end.
    let r = recover_sigma_phi(&bumped, &GRID, 1e-8).unwrap();
    let v = verify_recovery(&bumped, &r, &default_probes(unit()), 1e-5).unwrap();
    assert!(!v.pass && v.structural.is_some(), "{v:?}");
}

#[test]
fn cantor_operator_fails_with_norm_defect() {
    let t = BlackBoxOperator::transport(&cantor_psi(20), SignFlag::PLUS);
    let r = recover_sigma_phi(&t, &GRID, 1e-8).unwrap();
    assert_eq!(r.sigma, SignFlag::PLUS);
    assert!((r.phi[256] - 0.5).abs() < 1e-6);
    let v = verify_recovery(&t, &r, &default_probes(unit()), 1e-5).unwrap();
    assert!(!v.pass);
    assert!(v.structural.as_deref().is_some_and(|s| s.contains("ends at")), "{v:?}");
    let one = &v.probes[0];
    assert!((one.norm - 1.0).abs() < 1e-6 && (one.image_norm - 0.5).abs() < 1e-6, "{one:?}");
    assert!(one.norm - one.image_norm >= 0.4);
}

#[test]
fn degenerate_operator() {
    let zero = BlackBoxOperator::new(unit(), unit(), |_| Ok(Integrand::constant(unit(), 0.0)));
    assert!(matches!(recover_sigma_phi(&zero, &GRID, 1e-8), Err(Error::DegenerateOperator { .. })));
}

#[test]
fn recovery_is_idempotent() {
    let tol = 1e-8;
    for phi in hidden() {
        let t = BlackBoxOperator::transport(&phi, SignFlag::MINUS);
        let r = recover_sigma_phi(&t, &GRID, tol).unwrap();
        let hat = interpolated_map(&r.grid, &r.phi, &r.breaks, unit(), tol).unwrap();
        let again = recover_sigma_phi(&BlackBoxOperator::transport(&hat, r.sigma), &GRID, tol).unwrap();
        assert_eq!(again.sigma, r.sigma);
        let drift = again.grid.iter().zip(&again.phi).map(|(&x, p)| (hat.forward(x) - p).abs()).fold(0.0, f64::max);
        assert!(drift < 2.0 * tol, "{}: {drift:e}", phi.name());
    }
}

#[test]
fn interpolated_map_checks_shape() {
    let grid = [0.0, 0.5, 1.0];
    assert!(matches!(interpolated_map(&grid, &[0.0, 0.6, 0.5], &[], unit(), 1e-6), Err(Error::NotIncreasing { .. })));
    assert!(matches!(interpolated_map(&grid, &[0.0, 0.2, 0.9], &[], unit(), 1e-6), Err(Error::EndpointMismatch { .. })));
    let m = interpolated_map(&grid, &[0.0, 0.25, 1.0], &[], unit(), 1e-6).unwrap();
    m.validate(1000).unwrap();
    assert_eq!(m.exceptions(), &[0.0]);
}

#[test]
fn serialized_operator_matches_concurrent_one() {
    let t = BlackBoxOperator::transport(&exp_map(), SignFlag::PLUS);
    let a = recover_sigma_phi(&t, &GRID, 1e-8).unwrap();
    let b = recover_sigma_phi(&t.clone().serialized(), &GRID, 1e-8).unwrap();
    assert_eq!(a, b);
}
