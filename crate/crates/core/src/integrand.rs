//! Integrands: representatives of KH classes with declared bad points.

use std::fmt;
use std::sync::Arc;

use crate::cell::Cell;
use crate::error::{Error, Result};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function on a cell.
///
/// `singular_points` are where the formula is undefined; the representative
/// takes the value 0 there. `null_exceptions` override the value at finitely
/// many points. Neither changes the integral, but both shape the gauge.
#[derive(Clone)]
pub struct Integrand {
    eval: RealFn,
    cell: Cell,
    singular: Vec<f64>,
    exceptions: Vec<(f64, f64)>,
}

impl Integrand {
    pub fn new(cell: Cell, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_arc(cell, Arc::new(f))
    }

    pub fn from_arc(cell: Cell, eval: RealFn) -> Self {
        Self {
            eval,
            cell,
            singular: Vec::new(),
            exceptions: Vec::new(),
        }
    }

    /// The constant function on `cell`.
    pub fn constant(cell: Cell, value: f64) -> Self {
        Self::new(cell, move |_| value)
    }

    pub fn with_singular_points(mut self, points: impl IntoIterator<Item = f64>) -> Result<Self> {
        for p in points {
            self.check_inside(p)?;
            self.singular.push(p);
        }
        self.singular.sort_by(f64::total_cmp);
        self.singular.dedup();
        Ok(self)
    }

    pub fn with_exception(mut self, x: f64, value: f64) -> Result<Self> {
        self.check_inside(x)?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("exception value at {x} is not finite")));
        }
        match self.exceptions.binary_search_by(|(p, _)| p.total_cmp(&x)) {
            Ok(i) => self.exceptions[i].1 = value,
            Err(i) => self.exceptions.insert(i, (x, value)),
        }
        Ok(self)
    }

    pub fn with_exceptions(self, points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        points.into_iter().try_fold(self, |f, (x, v)| f.with_exception(x, v))
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        if self.cell.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: format!("point {x}"),
                domain: self.cell,
            })
        }
    }

    pub fn cell(&self) -> Cell {
        self.cell
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular
    }

    pub fn null_exceptions(&self) -> &[(f64, f64)] {
        &self.exceptions
    }

    pub fn eval_fn(&self) -> &RealFn {
        &self.eval
    }

    /// The formula itself, with no special-point handling.
    #[inline]
    pub fn raw(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Value of the representative: overrides first, then 0 at singular
    /// points, else the formula, which must be finite.
    pub fn sample(&self, x: f64) -> Result<f64> {
        if let Some(v) = self.exception_value(x) {
            return Ok(v);
        }
        if self.is_singular(x) {
            return Ok(0.0);
        }
        self.sample_regular(x)
    }

    /// Evaluates at a point known not to be special.
    #[inline]
    pub(crate) fn sample_regular(&self, x: f64) -> Result<f64> {
        let v = (self.eval)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample { x })
        }
    }

    pub fn exception_value(&self, x: f64) -> Option<f64> {
        self.exceptions
            .binary_search_by(|(p, _)| p.total_cmp(&x))
            .ok()
            .map(|i| self.exceptions[i].1)
    }

    pub fn is_singular(&self, x: f64) -> bool {
        self.singular.binary_search_by(|p| p.total_cmp(&x)).is_ok()
    }

    /// Singular points and exception points, sorted and deduplicated.
    pub fn special_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.singular.iter().copied().chain(self.exceptions.iter().map(|e| e.0)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// The same representative on a subcell.
    pub fn restrict(&self, cell: Cell) -> Result<Self> {
        if !self.cell.contains_cell(&cell) {
            return Err(Error::Domain {
                what: format!("cell {cell}"),
                domain: self.cell,
            });
        }
        Ok(Self {
            eval: self.eval.clone(),
            cell,
            singular: self.singular.iter().copied().filter(|&p| cell.contains(p)).collect(),
            exceptions: self.exceptions.iter().copied().filter(|&(p, _)| cell.contains(p)).collect(),
        })
    }

    /// `a·self + b·other` on the common cell.
    pub fn linear_combination(&self, a: f64, other: &Integrand, b: f64) -> Result<Self> {
        if self.cell != other.cell {
            return Err(Error::DomainMismatch {
                expected: self.cell,
                got: other.cell,
            });
        }
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let eval: RealFn = Arc::new(move |x| a * f(x) + b * g(x));
        let mut singular: Vec<f64> = self.singular.iter().chain(&other.singular).copied().collect();
        singular.sort_by(f64::total_cmp);
        singular.dedup();
        let mut exceptions = Vec::new();
        let mut points: Vec<f64> = self.exceptions.iter().chain(&other.exceptions).map(|e| e.0).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        for p in points {
            exceptions.push((p, a * self.sample(p)? + b * other.sample(p)?));
        }
        Ok(Self {
            eval,
            cell: self.cell,
            singular,
            exceptions,
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let f = self.eval.clone();
        Self {
            eval: Arc::new(move |x| a * f(x)),
            cell: self.cell,
            singular: self.singular.clone(),
            exceptions: self.exceptions.iter().map(|&(p, v)| (p, a * v)).collect(),
        }
    }

    pub fn difference(&self, other: &Integrand) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("cell", &self.cell)
            .field("singular", &self.singular)
            .field("exceptions", &self.exceptions)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_conventions() {
        let f = Integrand::new(Cell::unit(), |x: f64| 1.0 / x)
            .with_singular_points([0.0])
            .unwrap()
            .with_exception(0.5, 7.0)
            .unwrap();
        assert_eq!(f.sample(0.0).unwrap(), 0.0);
        assert_eq!(f.sample(0.5).unwrap(), 7.0);
        assert_eq!(f.sample(0.25).unwrap(), 4.0);
        assert_eq!(f.special_points(), vec![0.0, 0.5]);
    }

    #[test]
    fn undeclared_singularity_is_loud() {
        let f = Integrand::new(Cell::unit(), |x: f64| 1.0 / x);
        assert_eq!(f.sample(0.0), Err(Error::NonFiniteSample { x: 0.0 }));
    }

    #[test]
    fn points_must_be_inside() {
        let f = Integrand::constant(Cell::unit(), 1.0);
        assert!(f.clone().with_singular_points([2.0]).is_err());
        assert!(f.with_exception(-0.1, 1.0).is_err());
    }

    #[test]
    fn combination_merges_special_points() {
        let f = Integrand::constant(Cell::unit(), 1.0).with_exception(0.5, 3.0).unwrap();
        let g = Integrand::new(Cell::unit(), |x| x).with_singular_points([0.25]).unwrap();
        let h = f.linear_combination(2.0, &g, -1.0).unwrap();
        assert_eq!(h.sample(0.5).unwrap(), 6.0 - 0.5);
        assert_eq!(h.sample(0.25).unwrap(), 0.0);
        assert_eq!(h.sample(0.75).unwrap(), 2.0 - 0.75);
    }
}
