#![allow(dead_code)]

use std::f64::consts::PI;

use kurzweil::{Cell, Integrand};

/// Adaptive Simpson with Richardson correction. Only for smooth integrands.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

pub fn unit() -> Cell {
    Cell::unit()
}

pub fn flagship_fn(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let (s, c) = (1.0 / (x * x)).sin_cos();
    2.0 * x * s - 2.0 / x * c
}

pub fn flagship() -> Integrand {
    Integrand::new(unit(), flagship_fn).with_singular_points([0.0]).unwrap()
}

pub fn flagship_primitive(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x * (1.0 / (x * x)).sin()
    }
}

/// Smooth test integrands on [0, 1] with closed-form integrals.
pub fn smooth_family() -> Vec<(&'static str, fn(f64) -> f64, f64)> {
    vec![
        ("one", |_| 1.0, 1.0),
        ("x", |x| x, 0.5),
        ("cubic", |x| 3.0 * x * x * x - x + 2.0, 3.0 / 4.0 - 0.5 + 2.0),
        ("sin", |x| (2.0 * PI * x).sin(), 0.0),
        ("exp", f64::exp, std::f64::consts::E - 1.0),
        ("cos3", |x| (3.0 * x).cos(), (3.0f64).sin() / 3.0),
    ]
}
