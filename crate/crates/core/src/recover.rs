//! Recovering `(σ, φ)` from an operator known only through its action.

use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{AdditiveCellFn, Cell};
use crate::error::{Error, Result};
use crate::indefinite::{alexiewicz_distance, alexiewicz_norm, indefinite_integral, GridSpec, SampledCurve};
use crate::integrand::Integrand;
use crate::transport::{ac_probe, transport_apply, BiACMap, ProbeBudget, SignFlag};

type ApplyFn = Arc<dyn Fn(&Integrand) -> Result<Integrand> + Send + Sync>;

/// A map from integrands on the codomain cell `Ĩ` to integrands on the
/// domain cell `I`.
///
/// `apply` must be safe to call from several threads at once unless the
/// operator is [`serialized`](Self::serialized).
#[derive(Clone)]
pub struct BlackBoxOperator {
    apply: ApplyFn,
    domain: Cell,
    codomain: Cell,
    lock: Option<Arc<Mutex<()>>>,
}

impl fmt::Debug for BlackBoxOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxOperator")
            .field("domain", &self.domain)
            .field("codomain", &self.codomain)
            .field("serialized", &self.lock.is_some())
            .finish_non_exhaustive()
    }
}

impl BlackBoxOperator {
    pub fn new(
        domain: Cell,
        codomain: Cell,
        apply: impl Fn(&Integrand) -> Result<Integrand> + Send + Sync + 'static,
    ) -> Self {
        Self {
            apply: Arc::new(apply),
            domain,
            codomain,
            lock: None,
        }
    }

    /// `T_φ` with sign `σ`.
    pub fn transport(phi: &BiACMap, sigma: SignFlag) -> Self {
        let phi = phi.clone();
        Self::new(phi.domain(), phi.codomain(), move |f| transport_apply(&phi, sigma, f))
    }

    /// Calls to `apply` take a shared lock, one at a time.
    pub fn serialized(mut self) -> Self {
        self.lock = Some(Arc::new(Mutex::new(())));
        self
    }

    /// `f ↦ T(f) + g`.
    pub fn perturbed(&self, g: Integrand) -> Result<Self> {
        if g.cell() != self.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain,
                got: g.cell(),
            });
        }
        let inner = self.clone();
        Ok(Self::new(self.domain, self.codomain, move |f| inner.apply(f)?.linear_combination(1.0, &g, 1.0)))
    }

    pub fn domain(&self) -> Cell {
        self.domain
    }

    pub fn codomain(&self) -> Cell {
        self.codomain
    }

    pub fn apply(&self, f: &Integrand) -> Result<Integrand> {
        if f.cell() != self.codomain {
            return Err(Error::DomainMismatch {
                expected: self.codomain,
                got: f.cell(),
            });
        }
        let out = match &self.lock {
            Some(m) => {
                let _guard = m.lock().unwrap_or_else(|e| e.into_inner());
                (self.apply)(f)?
            }
            None => (self.apply)(f)?,
        };
        if out.cell() != self.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain,
                got: out.cell(),
            });
        }
        Ok(out)
    }

    /// `‖T(f + g) − T(f) − T(g)‖_A`.
    pub fn linearity_defect(&self, f: &Integrand, g: &Integrand, tol: f64) -> Result<f64> {
        let sum = f.linear_combination(1.0, g, 1.0)?;
        let d = self.apply(&sum)?.difference(&self.apply(f)?)?.difference(&self.apply(g)?)?;
        alexiewicz_norm(&d, &self.domain, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub sigma: SignFlag,
    /// `φ` on the grid, as absolute values in `Ĩ`.
    pub phi: Vec<f64>,
    pub grid: Vec<f64>,
    /// `∫ T(1)` over `I`.
    pub total: f64,
    /// Declared singular points of `T(1)`, where `φ′` may jump.
    pub breaks: Vec<f64>,
}

impl Recovery {
    /// `φ − min Ĩ` as a curve starting at 0.
    pub fn offset_curve(&self) -> Result<SampledCurve> {
        let base = self.phi[0];
        SampledCurve::new(self.grid.clone(), self.phi.iter().map(|v| v - base).collect(), 0.0)
    }
}

/// Integrates `u = T(1)`; then `σ = sign u(hi)` and `φ = min Ĩ + σ·u`.
pub fn recover_sigma_phi(t: &BlackBoxOperator, grid: &GridSpec, tol: f64) -> Result<Recovery> {
    let one = Integrand::constant(t.codomain, 1.0);
    let image = t.apply(&one)?;
    let u = indefinite_integral(&image, &t.domain, grid, tol)?;
    let total = *u.values().last().expect("nonempty curve");
    if !(total.abs() > tol.max(f64::EPSILON * t.codomain.length())) {
        return Err(Error::DegenerateOperator { value: total });
    }
    let sigma = SignFlag::of(total);
    let base = t.codomain.lo();
    let phi = u.values().iter().map(|&v| base + sigma.value() * v).collect();
    Ok(Recovery {
        sigma,
        phi,
        grid: u.grid().to_vec(),
        total,
        breaks: image.special_points(),
    })
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
///
/// Slopes are computed separately on each run between break knots, so the
/// interpolant may have a corner there.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Slopes at the two ends of each segment.
    ds: Vec<(f64, f64)>,
}

impl MonotoneCubic {
    /// `ys` must be strictly increasing.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::with_breaks(xs, ys, &[])
    }

    /// Knots equal to one of `breaks` split the slope computation.
    pub fn with_breaks(xs: Vec<f64>, ys: Vec<f64>, breaks: &[f64]) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidArgument("interpolant needs two or more matching knots".into()));
        }
        if let Some(w) = xs.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(format!("knots not increasing at {}", w[1])));
        }
        if let Some(k) = (1..ys.len()).find(|&k| !(ys[k - 1] < ys[k])) {
            return Err(Error::NotIncreasing { x: xs[k] });
        }
        let n = xs.len();
        let mut cuts: Vec<usize> = vec![0];
        cuts.extend((1..n - 1).filter(|&k| breaks.contains(&xs[k])));
        cuts.push(n - 1);
        let mut ds = Vec::with_capacity(n - 1);
        for run in cuts.windows(2) {
            let d = run_slopes(&xs[run[0]..=run[1]], &ys[run[0]..=run[1]]);
            ds.extend(d.windows(2).map(|w| (w[0], w[1])));
        }
        Ok(Self { xs, ys, ds })
    }

    /// Knots where a one-sided slope vanishes.
    pub fn flat_knots(&self) -> Vec<f64> {
        let n = self.xs.len();
        (0..n)
            .filter(|&k| (k > 0 && self.ds[k - 1].1 <= 0.0) || (k < n - 1 && self.ds[k].0 <= 0.0))
            .map(|k| self.xs[k])
            .collect()
    }

    fn segment(&self, x: f64) -> usize {
        self.xs.partition_point(|&p| p <= x).clamp(1, self.xs.len() - 1) - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn value(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = ((x - self.xs[k]) / h).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.ds[k].0
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.ds[k].1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = ((x - self.xs[k]) / h).clamp(0.0, 1.0);
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * (self.ys[k] - self.ys[k + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.ds[k].0
            + (3.0 * t2 - 2.0 * t) * self.ds[k].1
    }

    /// Bisection for `value(x) = y`, clamped to the knot range.
    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y <= self.ys[0] {
            return self.xs[0];
        }
        if y >= self.ys[n - 1] {
            return self.xs[n - 1];
        }
        let k = self.ys.partition_point(|&v| v <= y) - 1;
        let (mut a, mut b) = (self.xs[k], self.xs[k + 1]);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.value(m) < y {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

fn run_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut ds = vec![0.0; n];
    for k in 1..n - 1 {
        let (w1, w2) = (2.0 * h[k] + h[k - 1], h[k] + 2.0 * h[k - 1]);
        ds[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    ds[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    ds[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    ds
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// `φ̂` from recovered samples, as a map pack onto `codomain`.
///
/// The interpolant is C¹, so its derivative is right everywhere; knots with
/// zero slope are declared exceptions since `(φ̂⁻¹)′` is infinite over them.
pub fn interpolated_map(grid: &[f64], phi: &[f64], breaks: &[f64], codomain: Cell, tol: f64) -> Result<BiACMap> {
    let m = Arc::new(MonotoneCubic::with_breaks(grid.to_vec(), phi.to_vec(), breaks)?);
    let slack = tol * (1.0 + codomain.length());
    for (got, expected) in [(phi[0], codomain.lo()), (phi[phi.len() - 1], codomain.hi())] {
        if (got - expected).abs() > slack {
            return Err(Error::EndpointMismatch { expected, got });
        }
    }
    let domain = Cell::new(grid[0], grid[grid.len() - 1])?;
    let flat = m.flat_knots();
    // Knot values are within `slack` of the codomain ends; pin them there.
    let (clo, chi) = (codomain.lo(), codomain.hi());
    let scale = codomain.length() / (phi[phi.len() - 1] - phi[0]);
    let (m1, m2, m3, m4) = (m.clone(), m.clone(), m.clone(), m);
    let p0 = phi[0];
    let to_c = move |v: f64| clo + (v - p0) * scale;
    let from_c = move |y: f64| p0 + (y - clo) / scale;
    BiACMap::new(
        "recovered",
        domain,
        codomain,
        Arc::new(move |x| to_c(m1.value(x)).clamp(clo, chi)),
        Arc::new(move |x| scale * m2.derivative(x)),
        Arc::new(move |y| m3.inverse(from_c(y))),
        Arc::new(move |y| 1.0 / (scale * m4.derivative(m4.inverse(from_c(y))))),
    )
    .with_exceptions(flat)
}

/// Per-probe outcome of [`verify_recovery`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub index: usize,
    /// `‖f‖_A` over `Ĩ`.
    pub norm: f64,
    /// `‖T f‖_A` over `I`.
    pub image_norm: f64,
    /// `‖T f − T_φ̂ f‖_A`; absent when `φ̂` could not be built.
    pub agreement: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub sigma: SignFlag,
    /// Why `φ̂` could not be built, if it could not.
    pub structural: Option<String>,
    pub probes: Vec<ProbeReport>,
    /// `‖T(f+g) − T f − T g‖_A` over consecutive probe pairs.
    pub linearity: Vec<f64>,
    /// `ac_probe` sums for `φ̂` and `φ̂⁻¹` at total length `AC_DELTA`.
    pub ac_forward: Option<f64>,
    pub ac_inverse: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Family length for the AC falsifiers, and the mass that counts as a witness.
pub const AC_DELTA: f64 = 1e-2;
pub const AC_WITNESS: f64 = 0.5;

/// The default probes `{1, y, sin 2πy}` on `cell`.
pub fn default_probes(cell: Cell) -> Vec<Integrand> {
    let (lo, len) = (cell.lo(), cell.length());
    vec![
        Integrand::constant(cell, 1.0),
        Integrand::new(cell, |y| y),
        Integrand::new(cell, move |y| (2.0 * std::f64::consts::PI * (y - lo) / len).sin()),
    ]
}

/// Compares `T` with `T_φ̂` on every probe.
///
/// A probe passes when `‖T f − T_φ̂ f‖_A` and `|‖T f‖_A − ‖f‖_A|` are both
/// below `tol·(1 + ‖f‖_A)`. If `φ̂` is not increasing or misses the ends of
/// `Ĩ`, the report fails but the norm comparisons are still made.
pub fn verify_recovery(t: &BlackBoxOperator, r: &Recovery, probes: &[Integrand], tol: f64) -> Result<VerifyReport> {
    let sigma = r.sigma;
    let norm_tol = tol / 10.0;
    let hat = match interpolated_map(&r.grid, &r.phi, &r.breaks, t.codomain, tol) {
        Ok(m) => Ok(m),
        Err(e @ (Error::NotIncreasing { .. } | Error::EndpointMismatch { .. })) => Err(e.to_string()),
        Err(e) => return Err(e),
    };
    let probes_out = probes
        .par_iter()
        .enumerate()
        .map(|(index, f)| {
            let tf = t.apply(f)?;
            let (norm, image_norm) = rayon::join(
                || alexiewicz_norm(f, &t.codomain, norm_tol),
                || alexiewicz_norm(&tf, &t.domain, norm_tol),
            );
            let (norm, image_norm) = (norm?, image_norm?);
            let agreement = match &hat {
                Ok(m) => {
                    let model = transport_apply(m, sigma, f)?;
                    Some(alexiewicz_distance(&tf, &model, &t.domain, norm_tol)?)
                }
                Err(_) => None,
            };
            let threshold = tol * (1.0 + norm);
            let pass = agreement.is_some_and(|a| a < threshold) && (image_norm - norm).abs() < threshold;
            Ok(ProbeReport {
                index,
                norm,
                image_norm,
                agreement,
                threshold,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let linearity = probes
        .par_windows(2)
        .map(|w| t.linearity_defect(&w[0], &w[1], norm_tol))
        .collect::<Result<Vec<_>>>()?;
    let (ac_forward, ac_inverse) = match &hat {
        Ok(m) => {
            let budget = ProbeBudget {
                samples: 1 << 10,
                windows: 20,
                random_trials: 200,
                ..ProbeBudget::default()
            };
            let fwd = m.clone();
            let inv = m.inverse_map();
            let a = ac_probe(&AdditiveCellFn::from_point_fn(m.domain(), move |x| fwd.forward(x)), AC_DELTA * m.domain().length(), &budget);
            let b = ac_probe(
                &AdditiveCellFn::from_point_fn(inv.domain(), move |y| inv.forward(y)),
                AC_DELTA * m.codomain().length(),
                &budget,
            );
            (Some(a.best_sum), Some(b.best_sum))
        }
        Err(_) => (None, None),
    };
    let linear_ok = linearity
        .iter()
        .enumerate()
        .all(|(k, d)| *d < tol * (1.0 + probes_out[k].norm + probes_out[k + 1].norm));
    let ac_ok = |s: Option<f64>, len: f64| s.is_some_and(|s| s < AC_WITNESS * len);
    let pass = hat.is_ok()
        && probes_out.iter().all(|p| p.pass)
        && linear_ok
        && ac_ok(ac_forward, t.codomain.length())
        && ac_ok(ac_inverse, t.domain.length());
    Ok(VerifyReport {
        sigma,
        structural: hat.err(),
        probes: probes_out,
        linearity,
        ac_forward,
        ac_inverse,
        tolerance: tol,
        pass,
    })
}
