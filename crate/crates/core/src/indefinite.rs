//! Indefinite integrals, the Alexiewicz norm and the a.e. differentiation check.

use std::io::{self, Write};

use serde::Serialize;

use crate::cell::Cell;
use crate::error::{Error, Result};
use crate::integrand::Integrand;
use crate::integrate::{integrate_panels, kh_integrate_with, KhOptions};
use crate::sum::CompensatedSum;

/// Samples of `x ↦ ∫ over [lo, x]` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
    refinement_tol: f64,
}

impl SampledCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, refinement_tol: f64) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "curve needs at least two points and one value per point (got {} and {})",
                grid.len(),
                values.len()
            )));
        }
        if let Some(w) = grid.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(format!("grid not strictly increasing at {}", w[1])));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument(format!("curve must start at 0, got {}", values[0])));
        }
        Ok(Self {
            grid,
            values,
            refinement_tol,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn refinement_tol(&self) -> f64 {
        self.refinement_tol
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.grid[0], self.grid[self.grid.len() - 1]).expect("validated grid")
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Piecewise-linear interpolation, clamped to the end values outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return self.values[0];
        }
        if x >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let k = g.partition_point(|&p| p <= x);
        let (x0, x1) = (g[k - 1], g[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }

    /// `max |values|` and the grid point where it is attained.
    pub fn sup_norm(&self) -> (f64, f64) {
        let mut best = (0.0, self.grid[0]);
        for (&x, &v) in self.grid.iter().zip(&self.values) {
            if v.abs() > best.0 {
                best = (v.abs(), x);
            }
        }
        best
    }

    /// Largest jump between consecutive samples.
    pub fn max_increment(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,F")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{x:e},{v:e}")?;
        }
        Ok(())
    }
}

/// How the grid of an indefinite integral is chosen. Endpoints and the
/// integrand's singular points are always added.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `n` equal panels.
    Uniform(usize),
    Points(Vec<f64>),
}

impl GridSpec {
    pub fn points(&self, i: &Cell, f: &Integrand) -> Result<Vec<f64>> {
        let mut pts = match self {
            GridSpec::Uniform(n) => {
                if *n == 0 {
                    return Err(Error::InvalidArgument("grid needs at least one panel".into()));
                }
                (0..=*n).map(|k| i.lo() + i.length() * k as f64 / *n as f64).collect()
            }
            GridSpec::Points(p) => {
                if let Some(&x) = p.iter().find(|&&x| !i.contains(x)) {
                    return Err(Error::Domain {
                        what: format!("grid point {x}"),
                        domain: *i,
                    });
                }
                p.clone()
            }
        };
        pts.extend([i.lo(), i.hi()]);
        pts.extend(f.singular_points().iter().copied().filter(|&s| i.contains(s)));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        // The uniform formula can land a hair off hi.
        if let Some(last) = pts.last_mut() {
            *last = i.hi();
        }
        Ok(pts)
    }
}

pub fn indefinite_integral(f: &Integrand, i: &Cell, grid: &GridSpec, tol: f64) -> Result<SampledCurve> {
    indefinite_integral_with(f, i, grid, tol, &KhOptions::default())
}

/// One pass over all panels; convergence is required of every prefix total.
pub fn indefinite_integral_with(
    f: &Integrand,
    i: &Cell,
    grid: &GridSpec,
    tol: f64,
    opts: &KhOptions,
) -> Result<SampledCurve> {
    let pts = grid.points(i, f)?;
    curve_on(f, &pts, tol, opts)
}

fn curve_on(f: &Integrand, pts: &[f64], tol: f64, opts: &KhOptions) -> Result<SampledCurve> {
    let cell = Cell::new(pts[0], pts[pts.len() - 1])?;
    let inner = &pts[1..pts.len() - 1];
    let p = integrate_panels(f, &cell, inner, tol, opts)?;
    let mut acc = CompensatedSum::new();
    let mut values = Vec::with_capacity(pts.len());
    values.push(0.0);
    for v in p.panels {
        acc.add(v);
        values.push(acc.value());
    }
    SampledCurve::new(pts.to_vec(), values, tol)
}

/// Knobs for [`alexiewicz_norm_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormOptions {
    pub initial_panels: usize,
    pub max_refinements: usize,
    pub kh: KhOptions,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            initial_panels: 128,
            max_refinements: 40,
            kh: KhOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub argmax: f64,
    pub refinements: usize,
    pub curve: SampledCurve,
}

pub fn alexiewicz_norm(f: &Integrand, i: &Cell, tol: f64) -> Result<f64> {
    alexiewicz_norm_with(f, i, tol, &NormOptions::default()).map(|n| n.value)
}

/// `‖f − g‖` on `i`, from the two primitives rather than the pointwise
/// difference. Near-cancelling integrands stay cheap this way.
pub fn alexiewicz_distance(f: &Integrand, g: &Integrand, i: &Cell, tol: f64) -> Result<f64> {
    sup_estimate(&[(1.0, f), (-1.0, g)], i, tol, &NormOptions::default()).map(|n| n.value)
}

/// `sup_x |∫ over [lo, x] f|`, estimated on a grid refined around the argmax.
pub fn alexiewicz_norm_with(f: &Integrand, i: &Cell, tol: f64, opts: &NormOptions) -> Result<NormEstimate> {
    sup_estimate(&[(1.0, f)], i, tol, opts)
}

/// Primitive of `Σ c·f` sampled at `pts`, each term to `tol / terms`.
fn combined_curve(terms: &[(f64, &Integrand)], pts: &[f64], tol: f64, opts: &KhOptions) -> Result<Vec<f64>> {
    let cell = Cell::new(pts[0], pts[pts.len() - 1])?;
    let each = tol / terms.len() as f64;
    let mut values = vec![0.0; pts.len()];
    for (c, f) in terms {
        let piece = f.restrict(cell)?;
        let curve = curve_on(&piece, pts, each, opts)?;
        for (v, w) in values.iter_mut().zip(&curve.values) {
            *v += c * w;
        }
    }
    Ok(values)
}

fn sup_estimate(terms: &[(f64, &Integrand)], i: &Cell, tol: f64, opts: &NormOptions) -> Result<NormEstimate> {
    let int_tol = tol / 2.0;
    let mut grid = Vec::new();
    for (_, f) in terms {
        grid.extend(GridSpec::Uniform(opts.initial_panels.max(1)).points(i, f)?);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut values = combined_curve(terms, &grid, int_tol, &opts.kh)?;
    let (mut best, mut argmax) = SampledCurve::new(grid.clone(), values.clone(), int_tol)?.sup_norm();
    let mut refinements = 0;
    while refinements < opts.max_refinements {
        let k = grid.partition_point(|&x| x < argmax);
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(grid.len() - 1);
        // Triple the panels on each side of the argmax.
        let mut fresh = Vec::new();
        for j in lo..hi {
            let (a, b) = (grid[j], grid[j + 1]);
            fresh.push((j, a + (b - a) / 3.0));
            fresh.push((j, a + 2.0 * (b - a) / 3.0));
        }
        fresh.retain(|&(j, x)| grid[j] < x && x < grid[j + 1]);
        if fresh.is_empty() {
            break;
        }
        let mut local: Vec<f64> = std::iter::once(grid[lo])
            .chain(fresh.iter().map(|p| p.1))
            .chain(std::iter::once(grid[hi]))
            .collect();
        local.sort_by(f64::total_cmp);
        local.dedup();
        let sub = combined_curve(terms, &local, int_tol, &opts.kh)?;
        let base = values[lo];
        let mut merged: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();
        for (x, v) in local.iter().zip(&sub) {
            if grid[lo] < *x && *x < grid[hi] && grid.binary_search_by(|g| g.total_cmp(x)).is_err() {
                merged.push((*x, base + v));
            }
        }
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        grid = merged.iter().map(|p| p.0).collect();
        values = merged.iter().map(|p| p.1).collect();
        refinements += 1;
        let (m, x) = grid.iter().zip(&values).fold((0.0, grid[0]), |acc, (&x, &v)| if v.abs() > acc.0 { (v.abs(), x) } else { acc });
        let change = (m - best).abs();
        best = m;
        argmax = x;
        if change < tol / 10.0 && vertex_gain(&grid, &values, argmax) < tol / 10.0 {
            break;
        }
    }
    let curve = SampledCurve::new(grid, values, int_tol)?;
    Ok(NormEstimate {
        value: best,
        argmax,
        refinements,
        curve,
    })
}

/// How far a parabola through the argmax and its neighbours rises above the
/// sampled max of `|values|`; zero at the ends of the grid.
fn vertex_gain(grid: &[f64], values: &[f64], argmax: f64) -> f64 {
    let k = grid.partition_point(|&x| x < argmax);
    if k == 0 || k + 1 >= grid.len() {
        return 0.0;
    }
    let (x0, x1, x2) = (grid[k - 1], grid[k], grid[k + 1]);
    let (y0, y1, y2) = (values[k - 1].abs(), values[k].abs(), values[k + 1].abs());
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return 0.0;
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    (yv - y1).max(0.0)
}

/// Per-point outcome of [`ae_derivative_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeSample {
    pub x: f64,
    pub f: f64,
    /// `(h, |quotient − f(x)|)` along the schedule.
    pub errors: Vec<(f64, f64)>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub samples: Vec<DerivativeSample>,
    pub tolerance: f64,
    pub converged_fraction: f64,
}

/// Default step schedule: decades from 1e-2 down to 1e-10 of the cell length.
pub fn default_h_schedule(i: &Cell) -> Vec<f64> {
    (2..=10).map(|k| i.length() * 10f64.powi(-k)).collect()
}

/// Symmetric quotients `∫ over [x−h, x+h] / 2h`, each integral computed
/// afresh, compared with `f(x)`. A sample counts as converged when the
/// quotient at the finest usable step is within `tol`.
pub fn ae_derivative_check(
    f: &Integrand,
    curve: &SampledCurve,
    sample_points: &[f64],
    h_schedule: &[f64],
    tol: f64,
) -> DerivativeReport {
    let cell = curve.cell();
    let samples: Vec<DerivativeSample> = sample_points
        .iter()
        .map(|&x| {
            let fx = f.sample(x).unwrap_or(f64::NAN);
            let mut errors = Vec::new();
            for &h in h_schedule {
                let (a, b) = ((x - h).max(cell.lo()), (x + h).min(cell.hi()));
                let Ok(c) = Cell::new(a, b) else { continue };
                let Ok(piece) = f.restrict(c) else { continue };
                let q_tol = (tol * c.length() * 1e-2).max(f64::MIN_POSITIVE);
                if let Ok(r) = kh_integrate_with(&piece, &c, q_tol, &KhOptions::default()) {
                    errors.push((h, (r.value / c.length() - fx).abs()));
                }
            }
            let converged = fx.is_finite() && errors.last().is_some_and(|e| e.1 <= tol);
            DerivativeSample {
                x,
                f: fx,
                errors,
                converged,
            }
        })
        .collect();
    let n = samples.iter().filter(|s| s.converged).count();
    let converged_fraction = if samples.is_empty() { 1.0 } else { n as f64 / samples.len() as f64 };
    DerivativeReport {
        samples,
        tolerance: tol,
        converged_fraction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_validation() {
        assert!(SampledCurve::new(vec![0.0, 1.0], vec![0.0, 1.0], 1e-9).is_ok());
        assert!(SampledCurve::new(vec![0.0, 0.0], vec![0.0, 1.0], 1e-9).is_err());
        assert!(SampledCurve::new(vec![0.0, 1.0], vec![0.5, 1.0], 1e-9).is_err());
        assert!(SampledCurve::new(vec![0.0], vec![0.0], 1e-9).is_err());
    }

    #[test]
    fn grid_includes_singular_points() {
        let f = Integrand::constant(Cell::unit(), 1.0).with_singular_points([0.3]).unwrap();
        let pts = GridSpec::Uniform(4).points(&Cell::unit(), &f).unwrap();
        assert_eq!(pts, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn csv_header() {
        let c = SampledCurve::new(vec![0.0, 1.0], vec![0.0, 2.0], 1e-9).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,F\n0e0,0e0\n"));
    }

    #[test]
    fn interpolation() {
        let c = SampledCurve::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0], 1e-9).unwrap();
        assert_eq!(c.interpolate(0.5), 1.0);
        assert_eq!(c.interpolate(2.0), 1.0);
        assert_eq!(c.interpolate(5.0), 0.0);
        assert_eq!(c.sup_norm(), (2.0, 1.0));
    }
}
