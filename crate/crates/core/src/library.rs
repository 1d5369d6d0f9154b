//! Named integrands shared by tests, benches and the command line.

use std::f64::consts::PI;

use crate::cell::Cell;
use crate::integrand::Integrand;

/// `2x·sin(1/x²) − (2/x)·cos(1/x²)`, the derivative of `x²·sin(1/x²)`, on
/// `[0, 1]` with 0 singular. Integrable in the gauge sense only.
pub fn flagship() -> Integrand {
    Integrand::new(Cell::unit(), flagship_fn)
        .with_singular_points([0.0])
        .expect("0 is in the unit cell")
}

pub fn flagship_fn(x: f64) -> f64 {
    let (s, c) = (1.0 / (x * x)).sin_cos();
    2.0 * x * s - 2.0 / x * c
}

/// `x²·sin(1/x²)`, extended by 0 at 0.
pub fn flagship_primitive(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x * (1.0 / (x * x)).sin()
    }
}

/// `1/(2√y)` on `[0, 1]`, singular at 0.
pub fn inverse_sqrt() -> Integrand {
    Integrand::new(Cell::unit(), |y| 0.5 / y.sqrt())
        .with_singular_points([0.0])
        .expect("0 is in the unit cell")
}

/// The integrands of the change-of-variable matrix with their integrals
/// over `[0, 1]`.
pub fn matrix_integrands() -> Vec<(&'static str, Integrand, f64)> {
    vec![
        ("1", Integrand::constant(Cell::unit(), 1.0), 1.0),
        ("y", Integrand::new(Cell::unit(), |y| y), 0.5),
        ("sin(2*pi*y)", Integrand::new(Cell::unit(), |y| (2.0 * PI * y).sin()), 0.0),
        ("1/(2*sqrt(y))", inverse_sqrt(), 1.0),
        ("flagship", flagship(), 1f64.sin()),
    ]
}
