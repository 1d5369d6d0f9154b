//! Change-of-variable maps, the transport operator `T_φ` and probes of the
//! absolute continuity conditions behind it.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor::{cantor, in_stage_cover};
use crate::cell::{AdditiveCellFn, Cell};
use crate::error::{Error, Result};
use crate::indefinite::{alexiewicz_distance, alexiewicz_norm};
use crate::integrand::{Integrand, RealFn};
use crate::integrate::kh_integrate;

/// `σ ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct SignFlag(i8);

impl SignFlag {
    pub const PLUS: SignFlag = SignFlag(1);
    pub const MINUS: SignFlag = SignFlag(-1);

    pub fn new(sigma: i8) -> Result<Self> {
        match sigma {
            1 | -1 => Ok(SignFlag(sigma)),
            other => Err(Error::InvalidArgument(format!("sign flag must be ±1, got {other}"))),
        }
    }

    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Self::MINUS
        } else {
            Self::PLUS
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<i8> for SignFlag {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        SignFlag::new(v)
    }
}

impl From<SignFlag> for i8 {
    fn from(s: SignFlag) -> i8 {
        s.0
    }
}

impl std::ops::Mul for SignFlag {
    type Output = SignFlag;

    fn mul(self, rhs: SignFlag) -> SignFlag {
        SignFlag(self.0 * rhs.0)
    }
}

impl fmt::Display for SignFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// A homeomorphism `φ : I → Ĩ` packed with `φ′`, `φ⁻¹` and `(φ⁻¹)′`.
///
/// Derivatives need only be right off the finite `exceptions` set (for
/// `φ′`) and its image (for `(φ⁻¹)′`).
#[derive(Clone)]
pub struct BiACMap {
    name: String,
    domain: Cell,
    codomain: Cell,
    forward: RealFn,
    fderiv: RealFn,
    inverse: RealFn,
    ideriv: RealFn,
    exceptions: Vec<f64>,
    claimed_bi_ac: bool,
}

impl fmt::Debug for BiACMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BiACMap")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("codomain", &self.codomain)
            .field("exceptions", &self.exceptions)
            .field("claimed_bi_ac", &self.claimed_bi_ac)
            .finish_non_exhaustive()
    }
}

impl BiACMap {
    pub fn new(
        name: impl Into<String>,
        domain: Cell,
        codomain: Cell,
        forward: RealFn,
        fderiv: RealFn,
        inverse: RealFn,
        ideriv: RealFn,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            codomain,
            forward,
            fderiv,
            inverse,
            ideriv,
            exceptions: Vec::new(),
            claimed_bi_ac: true,
        }
    }

    pub fn with_exceptions(mut self, points: impl IntoIterator<Item = f64>) -> Result<Self> {
        for p in points {
            if !self.domain.contains(p) {
                return Err(Error::Domain {
                    what: format!("exception {p}"),
                    domain: self.domain,
                });
            }
            self.exceptions.push(p);
        }
        self.exceptions.sort_by(f64::total_cmp);
        self.exceptions.dedup();
        Ok(self)
    }

    pub fn with_claimed_bi_ac(mut self, claimed: bool) -> Self {
        self.claimed_bi_ac = claimed;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Cell {
        self.domain
    }

    pub fn codomain(&self) -> Cell {
        self.codomain
    }

    pub fn exceptions(&self) -> &[f64] {
        &self.exceptions
    }

    pub fn claimed_bi_ac(&self) -> bool {
        self.claimed_bi_ac
    }

    pub fn forward(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn fderiv(&self, x: f64) -> f64 {
        (self.fderiv)(x)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }

    pub fn ideriv(&self, y: f64) -> f64 {
        (self.ideriv)(y)
    }

    pub fn is_increasing(&self) -> bool {
        self.forward(self.domain.lo()) < self.forward(self.domain.hi())
    }

    /// Checks the endpoint, monotonicity and inverse conditions on `samples`
    /// equally spaced points.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let (a, b) = if self.is_increasing() {
            (self.codomain.lo(), self.codomain.hi())
        } else {
            (self.codomain.hi(), self.codomain.lo())
        };
        let scale = self.codomain.length() * f64::EPSILON;
        for (x, target) in [(self.domain.lo(), a), (self.domain.hi(), b)] {
            let got = self.forward(x);
            if (got - target).abs() > 4.0 * f64::EPSILON * target.abs().max(scale) {
                return Err(Error::EndpointMismatch { expected: target, got });
            }
        }
        let n = samples.max(2);
        let mut prev = None;
        for k in 0..=n {
            let x = self.domain.lo() + self.domain.length() * k as f64 / n as f64;
            let y = self.forward(x);
            if let Some(p) = prev {
                let ordered = if self.is_increasing() { p < y } else { p > y };
                if !ordered {
                    return Err(Error::NotIncreasing { x });
                }
            }
            prev = Some(y);
            let back = self.inverse(y);
            if (back - x).abs() > 1e-12 * x.abs().max(self.domain.length()) {
                return Err(Error::InvalidArgument(format!(
                    "{}: inverse(forward({x})) = {back}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// The pack of `φ⁻¹ : Ĩ → I`.
    pub fn inverse_map(&self) -> BiACMap {
        let exceptions: Vec<f64> = self
            .exceptions
            .iter()
            .map(|&x| self.forward(x).clamp(self.codomain.lo(), self.codomain.hi()))
            .collect();
        let mut m = BiACMap::new(
            format!("inverse of {}", self.name),
            self.codomain,
            self.domain,
            self.inverse.clone(),
            self.ideriv.clone(),
            self.forward.clone(),
            self.fderiv.clone(),
        );
        m.exceptions = exceptions;
        m.exceptions.sort_by(f64::total_cmp);
        m.exceptions.dedup();
        m.claimed_bi_ac = self.claimed_bi_ac;
        m
    }

    /// `self ∘ inner`, defined on `inner`'s domain.
    pub fn compose(&self, inner: &BiACMap) -> Result<BiACMap> {
        if inner.codomain != self.domain {
            return Err(Error::DomainMismatch {
                expected: self.domain,
                got: inner.codomain,
            });
        }
        let (f, fd, fi, fid) = (self.forward.clone(), self.fderiv.clone(), self.inverse.clone(), self.ideriv.clone());
        let (g, gd, gi, gid) = (inner.forward.clone(), inner.fderiv.clone(), inner.inverse.clone(), inner.ideriv.clone());
        let g2 = g.clone();
        let fi2 = fi.clone();
        let mut exceptions: Vec<f64> = inner.exceptions.clone();
        exceptions.extend(
            self.exceptions
                .iter()
                .map(|&p| inner.inverse(p).clamp(inner.domain.lo(), inner.domain.hi())),
        );
        let m = BiACMap::new(
            format!("{} after {}", self.name, inner.name),
            inner.domain,
            self.codomain,
            Arc::new(move |x| f(g(x))),
            Arc::new(move |x| fd(g2(x)) * gd(x)),
            Arc::new(move |y| gi(fi(y))),
            Arc::new(move |y| gid(fi2(y)) * fid(y)),
        )
        .with_claimed_bi_ac(self.claimed_bi_ac && inner.claimed_bi_ac);
        m.with_exceptions(exceptions)
    }
}

/// Library map packs.
pub mod maps {
    use super::*;

    fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> RealFn {
        Arc::new(f)
    }

    pub fn identity(cell: Cell) -> BiACMap {
        BiACMap::new("identity", cell, cell, arc(|x| x), arc(|_| 1.0), arc(|y| y), arc(|_| 1.0))
    }

    /// `x²` on `[0, 1]`. `(φ⁻¹)′` blows up at 0, which is declared.
    pub fn square() -> BiACMap {
        power_map(
            "x^2",
            Cell::unit(),
            Cell::unit(),
            arc(|x| x * x),
            arc(|x| 2.0 * x),
            arc(f64::sqrt),
            arc(|y| 0.5 / y.sqrt()),
        )
    }

    pub fn cube() -> BiACMap {
        power_map(
            "x^3",
            Cell::unit(),
            Cell::unit(),
            arc(|x| x * x * x),
            arc(|x| 3.0 * x * x),
            arc(f64::cbrt),
            arc(|y| 1.0 / (3.0 * y.cbrt().powi(2))),
        )
    }

    fn power_map(name: &str, domain: Cell, codomain: Cell, f: RealFn, fd: RealFn, g: RealFn, gd: RealFn) -> BiACMap {
        BiACMap::new(name, domain, codomain, f, fd, g, gd)
            .with_exceptions([0.0])
            .expect("0 is in the unit cell")
    }

    /// `(eˣ − 1)/(e − 1)` on `[0, 1]`.
    pub fn exp_map() -> BiACMap {
        let k = std::f64::consts::E - 1.0;
        BiACMap::new(
            "(exp(x)-1)/(e-1)",
            Cell::unit(),
            Cell::unit(),
            arc(move |x| x.exp_m1() / k),
            arc(move |x| x.exp() / k),
            arc(move |y| (y * k).ln_1p()),
            arc(move |y| k / (1.0 + y * k)),
        )
    }

    /// Increasing broken line through `(xs[i], ys[i])`; the knots are the
    /// derivative's exceptions.
    pub fn piecewise_affine(xs: &[f64], ys: &[f64]) -> Result<BiACMap> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidArgument("piecewise-affine map needs matching knot lists".into()));
        }
        if let Some(w) = xs.windows(2).zip(ys.windows(2)).find(|(a, b)| !(a[0] < a[1] && b[0] < b[1])) {
            return Err(Error::NotIncreasing { x: w.0[1] });
        }
        let domain = Cell::new(xs[0], xs[xs.len() - 1])?;
        let codomain = Cell::new(ys[0], ys[ys.len() - 1])?;
        let pl = |xs: Vec<f64>, ys: Vec<f64>| -> (RealFn, RealFn) {
            let (xs2, ys2) = (xs.clone(), ys.clone());
            let locate = move |xs: &[f64], x: f64| xs.partition_point(|&p| p <= x).clamp(1, xs.len() - 1);
            let f = arc(move |x| {
                let k = locate(&xs, x);
                ys[k - 1] + (x - xs[k - 1]) * (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1])
            });
            let d = arc(move |x| {
                let k = locate(&xs2, x);
                (ys2[k] - ys2[k - 1]) / (xs2[k] - xs2[k - 1])
            });
            (f, d)
        };
        let (f, fd) = pl(xs.to_vec(), ys.to_vec());
        let (g, gd) = pl(ys.to_vec(), xs.to_vec());
        BiACMap::new("piecewise-affine", domain, codomain, f, fd, g, gd).with_exceptions(xs.iter().copied())
    }

    /// The broken line used in the test matrix.
    pub fn piecewise_affine_default() -> BiACMap {
        piecewise_affine(&[0.0, 0.25, 0.6, 1.0], &[0.0, 0.5, 0.7, 1.0]).expect("valid knots")
    }

    /// `ψ = (x + C(x))/2` with `C` the stage-`n` Cantor function. Increasing
    /// and continuous with `ψ′ = ½` a.e., but not bi-AC: `ψ` carries the Cantor
    /// set onto a set of measure ½.
    pub fn cantor_psi(stage: u32) -> BiACMap {
        let forward = move |x: f64| 0.5 * (x + cantor(x, stage));
        let inverse = move |y: f64| {
            let (mut a, mut b) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if forward(m) < y {
                    a = m;
                } else {
                    b = m;
                }
            }
            if (forward(a) - y).abs() <= (forward(b) - y).abs() {
                a
            } else {
                b
            }
        };
        let inv: RealFn = Arc::new(inverse);
        let inv2 = inv.clone();
        BiACMap::new(
            "cantor-psi",
            Cell::unit(),
            Cell::unit(),
            Arc::new(forward),
            Arc::new(|_| 0.5),
            inv,
            Arc::new(move |y| if in_stage_cover(inv2(y), stage) { 0.0 } else { 2.0 }),
        )
        .with_claimed_bi_ac(false)
    }

    /// The five bi-AC maps of the test matrix, all on `[0, 1]`.
    pub fn bi_ac_matrix() -> Vec<BiACMap> {
        vec![
            identity(Cell::unit()),
            square(),
            cube(),
            exp_map(),
            piecewise_affine_default(),
        ]
    }
}

/// `x ↦ σ·f(φ(x))·φ′(x)`, zero at the map's exceptions.
///
/// Points where `f` is singular pull back to singular points; override values
/// of `f` pull back to overrides.
pub fn transport_apply(phi: &BiACMap, sigma: SignFlag, f: &Integrand) -> Result<Integrand> {
    if f.cell() != phi.codomain {
        return Err(Error::DomainMismatch {
            expected: phi.codomain,
            got: f.cell(),
        });
    }
    if !phi.is_increasing() {
        return Err(Error::InvalidArgument(format!(
            "{}: transport is defined for increasing maps",
            phi.name
        )));
    }
    let s = sigma.value();
    let (fwd, der, g) = (phi.forward.clone(), phi.fderiv.clone(), f.clone());
    let eval = move |x: f64| s * g.raw(fwd(x)) * der(x);
    let clamp = |x: f64| x.clamp(phi.domain.lo(), phi.domain.hi());
    let mut singular: Vec<f64> = phi.exceptions.clone();
    singular.extend(f.singular_points().iter().map(|&p| clamp(phi.inverse(p))));
    let exceptions: Vec<(f64, f64)> = f
        .null_exceptions()
        .iter()
        .map(|&(p, v)| {
            let x = clamp(phi.inverse(p));
            (x, s * v * phi.fderiv(x))
        })
        .filter(|(x, v)| !phi.exceptions.contains(x) && v.is_finite())
        .collect();
    Integrand::new(phi.domain, eval)
        .with_singular_points(singular)?
        .with_exceptions(exceptions)
}

/// Outcome of [`change_of_variable_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovReport {
    pub map: String,
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// `∫_I (f∘φ)·|φ′|` against `∫_Ĩ f`.
pub fn change_of_variable_check(phi: &BiACMap, f: &Integrand, tol: f64) -> Result<CovReport> {
    if f.cell() != phi.codomain {
        return Err(Error::DomainMismatch {
            expected: phi.codomain,
            got: f.cell(),
        });
    }
    let (fwd, der, g) = (phi.forward.clone(), phi.fderiv.clone(), f.clone());
    let clamp = |x: f64| x.clamp(phi.domain.lo(), phi.domain.hi());
    let mut singular = phi.exceptions.clone();
    singular.extend(f.singular_points().iter().map(|&p| clamp(phi.inverse(p))));
    let pulled = Integrand::new(phi.domain, move |x| g.raw(fwd(x)) * der(x).abs()).with_singular_points(singular)?;
    let int_tol = tol / 2.0;
    let (lhs, rhs) = rayon::join(|| kh_integrate(&pulled, &phi.domain, int_tol), || kh_integrate(f, &phi.codomain, int_tol));
    let (lhs, rhs) = (lhs?.value, rhs?.value);
    let discrepancy = (lhs - rhs).abs();
    let threshold = tol * (1.0 + rhs.abs());
    Ok(CovReport {
        map: phi.name.clone(),
        lhs,
        rhs,
        discrepancy,
        threshold,
        pass: discrepancy < threshold,
    })
}

/// Outcome of [`isometry_check`] and [`roundtrip_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub map: String,
    pub sigma: SignFlag,
    /// `‖T_φ f‖_A` for the isometry check, `‖T_φ T_{φ⁻¹} g − g‖_A` for the round trip.
    pub transported: f64,
    /// `‖f‖_A`.
    pub original: f64,
    pub defect: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn isometry_check(phi: &BiACMap, sigma: SignFlag, f: &Integrand, tol: f64) -> Result<NormReport> {
    let t = transport_apply(phi, sigma, f)?;
    let (a, b) = rayon::join(|| alexiewicz_norm(&t, &phi.domain, tol), || alexiewicz_norm(f, &phi.codomain, tol));
    let (transported, original) = (a?, b?);
    let defect = (transported - original).abs();
    let threshold = tol * (1.0 + original);
    Ok(NormReport {
        map: phi.name.clone(),
        sigma,
        transported,
        original,
        defect,
        threshold,
        pass: defect < threshold,
    })
}

/// `‖T_φ(T_{φ⁻¹} g) − g‖_A`.
pub fn roundtrip_check(phi: &BiACMap, sigma: SignFlag, g: &Integrand, tol: f64) -> Result<NormReport> {
    let back = transport_apply(&phi.inverse_map(), sigma, g)?;
    let there = transport_apply(phi, sigma, &back)?;
    let (d, o) = rayon::join(|| alexiewicz_distance(&there, g, &phi.domain, tol), || alexiewicz_norm(g, &phi.domain, tol));
    let (defect, original) = (d?, o?);
    Ok(NormReport {
        map: phi.name.clone(),
        sigma,
        transported: defect,
        original,
        defect,
        threshold: tol,
        pass: defect < tol,
    })
}

/// Search effort for [`ac_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeBudget {
    /// Samples per dyadic window.
    pub samples: usize,
    /// Dyadic windows towards each end of the cell.
    pub windows: usize,
    pub random_trials: usize,
    pub seed: u64,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        Self {
            samples: 1 << 14,
            windows: 40,
            random_trials: 2000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcProbeResult {
    /// `Σ |F(J)|` of the best family found: a lower bound on the modulus.
    pub best_sum: f64,
    pub total_length: f64,
    pub family: Vec<Cell>,
}

/// Searches for non-overlapping families of total length `< delta` with
/// large `Σ |F(J)|`.
///
/// `F` is sampled on dyadic windows accumulating at both ends; cells are the
/// monotone runs between sampled extrema, taken greedily by `|F(J)|/|J|`,
/// with the last one shortened to fit. A seeded random search competes.
pub fn ac_probe(f: &AdditiveCellFn, delta: f64, budget: &ProbeBudget) -> AcProbeResult {
    let dom = f.domain();
    let (lo, len) = (dom.lo(), dom.length());
    let mut xs: Vec<f64> = Vec::new();
    let n = budget.samples.max(2);
    xs.extend((0..=n).map(|k| lo + len * k as f64 / n as f64));
    for j in 1..=budget.windows {
        let (a, b) = (len * 0.5f64.powi(j as i32 + 1), len * 0.5f64.powi(j as i32));
        for k in 0..=n {
            let t = a + (b - a) * k as f64 / n as f64;
            xs.push(lo + t);
            xs.push(dom.hi() - t);
        }
    }
    xs.retain(|x| dom.contains(*x));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let vs: Vec<f64> = xs.par_iter().map(|&x| f.point_value(x)).collect();

    // Monotone runs as index ranges.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..xs.len() {
        let end_of_run = k + 1 == xs.len() || (vs[k] - vs[start]).signum() * (vs[k + 1] - vs[k]).signum() < 0.0;
        if end_of_run {
            runs.push((start, k));
            start = k;
        }
    }
    let gain = |a: usize, b: usize| (vs[b] - vs[a]).abs();
    runs.sort_by(|&(a, b), &(c, d)| {
        let r1 = gain(a, b) / (xs[b] - xs[a]);
        let r2 = gain(c, d) / (xs[d] - xs[c]);
        r2.total_cmp(&r1).then(a.cmp(&c))
    });
    let mut family = Vec::new();
    let mut total = 0.0;
    let mut sum = 0.0;
    for &(a, b) in &runs {
        let l = xs[b] - xs[a];
        if total + l < delta {
            total += l;
            sum += gain(a, b);
            family.push((a, b));
        } else if let Some((c, d)) = best_window(&xs, &vs, a, b, delta - total) {
            total += xs[d] - xs[c];
            sum += gain(c, d);
            family.push((c, d));
            break;
        }
    }
    let mut best = AcProbeResult {
        best_sum: sum,
        total_length: total,
        family: family.iter().map(|&(a, b)| Cell::new(xs[a], xs[b]).expect("ordered")).collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    for _ in 0..budget.random_trials {
        let m = rng.gen_range(1..=16);
        let mut cells: Vec<Cell> = (0..m)
            .map(|_| {
                let l = delta / m as f64 * rng.gen_range(0.01..0.999);
                let a = lo + rng.gen::<f64>() * (len - l);
                Cell::new(a, a + l).expect("positive length")
            })
            .collect();
        cells.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
        if cells.windows(2).any(|w| !w[0].nonoverlapping(&w[1])) {
            continue;
        }
        let s: f64 = cells.iter().map(|c| f.cell_value(c).map_or(0.0, f64::abs)).sum();
        if s > best.best_sum {
            best = AcProbeResult {
                best_sum: s,
                total_length: cells.iter().map(Cell::length).sum(),
                family: cells,
            };
        }
    }
    best.family.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    best
}

/// Sub-run of the monotone run `[a, b]` shorter than `room` with the largest
/// increment.
fn best_window(xs: &[f64], vs: &[f64], a: usize, b: usize, room: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut hi = a;
    for lo in a..b {
        hi = hi.max(lo);
        while hi < b && xs[hi + 1] - xs[lo] < room {
            hi += 1;
        }
        if hi > lo && best.is_none_or(|(c, d)| (vs[hi] - vs[lo]).abs() > (vs[d] - vs[c]).abs()) {
            best = Some((lo, hi));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LuzinReport {
    pub input_length: f64,
    pub image_length: f64,
}

/// Total length of a cover and of its image cells `[φ(lo), φ(hi)]`.
pub fn luzin_probe(phi: &BiACMap, cover: &[Cell]) -> Result<LuzinReport> {
    let mut input_length = 0.0;
    let mut image_length = 0.0;
    for c in cover {
        if !phi.domain.contains_cell(c) {
            return Err(Error::Domain {
                what: format!("cover cell {c}"),
                domain: phi.domain,
            });
        }
        input_length += c.length();
        image_length += (phi.forward(c.hi()) - phi.forward(c.lo())).abs();
    }
    Ok(LuzinReport {
        input_length,
        image_length,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroDerivativeReport {
    pub map: String,
    /// `(ε, estimated measure of {|φ′| < ε})`.
    pub estimates: Vec<(f64, f64)>,
}

/// Grid count of `{x : |φ′(x)| < ε}` at the midpoints of `grid` equal cells.
pub fn zero_derivative_probe(phi: &BiACMap, eps_schedule: &[f64], grid: usize) -> ZeroDerivativeReport {
    let n = grid.max(1);
    let h = phi.domain.length() / n as f64;
    let ds: Vec<f64> = (0..n)
        .map(|k| phi.domain.lo() + (k as f64 + 0.5) * h)
        .filter(|x| !phi.exceptions.contains(x))
        .map(|x| phi.fderiv(x).abs())
        .collect();
    let estimates = eps_schedule
        .iter()
        .map(|&e| (e, ds.iter().filter(|&&d| d < e).count() as f64 * h))
        .collect();
    ZeroDerivativeReport {
        map: phi.name.clone(),
        estimates,
    }
}

#[cfg(test)]
mod tests {
    use super::maps::*;
    use super::*;

    #[test]
    fn sign_flag() {
        assert!(SignFlag::new(0).is_err());
        assert_eq!(SignFlag::MINUS * SignFlag::MINUS, SignFlag::PLUS);
        assert_eq!(serde_json::to_string(&SignFlag::MINUS).unwrap(), "-1");
        assert!(serde_json::from_str::<SignFlag>("2").is_err());
    }

    #[test]
    fn library_maps_validate() {
        for m in bi_ac_matrix() {
            m.validate(1000).unwrap();
            m.inverse_map().validate(1000).unwrap();
        }
        cantor_psi(20).validate(1000).unwrap();
    }

    #[test]
    fn transport_examples() {
        let one = Integrand::constant(Cell::unit(), 1.0);
        let g = transport_apply(&square(), SignFlag::PLUS, &one).unwrap();
        assert_eq!(g.sample(0.3).unwrap(), 0.6);
        let s = Integrand::new(Cell::unit(), |y| (2.0 * std::f64::consts::PI * y).sin());
        let g = transport_apply(&square(), SignFlag::MINUS, &s).unwrap();
        let x: f64 = 0.7;
        assert_eq!(g.sample(x).unwrap(), -(2.0 * std::f64::consts::PI * (x * x)).sin() * (2.0 * x));
        let id = transport_apply(&identity(Cell::unit()), SignFlag::PLUS, &s).unwrap();
        assert_eq!(id.sample(0.3).unwrap(), s.sample(0.3).unwrap());
    }

    #[test]
    fn transport_pulls_back_special_points() {
        let f = Integrand::new(Cell::unit(), |y| 1.0 / (y - 0.25).abs().sqrt())
            .with_singular_points([0.25])
            .unwrap()
            .with_exception(0.81, 3.0)
            .unwrap();
        let g = transport_apply(&square(), SignFlag::PLUS, &f).unwrap();
        assert_eq!(g.singular_points(), &[0.0, 0.5]);
        assert_eq!(g.null_exceptions(), &[(0.9, 3.0 * 1.8)]);
        let p = transport_apply(&piecewise_affine_default(), SignFlag::PLUS, &Integrand::constant(Cell::unit(), 1.0)).unwrap();
        assert_eq!(p.singular_points(), &[0.0, 0.25, 0.6, 1.0]);
        assert_eq!(p.sample(0.25).unwrap(), 0.0);
    }

    #[test]
    fn domain_mismatch() {
        let f = Integrand::constant(Cell::new(0.0, 2.0).unwrap(), 1.0);
        assert!(matches!(transport_apply(&square(), SignFlag::PLUS, &f), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn composition_chain_rule() {
        let c = square().compose(&exp_map()).unwrap();
        let x: f64 = 0.4;
        let e = exp_map();
        assert_eq!(c.forward(x), e.forward(x).powi(2));
        assert!((c.fderiv(x) - 2.0 * e.forward(x) * e.fderiv(x)).abs() < 1e-15);
        c.validate(100).unwrap();
    }

    #[test]
    fn luzin_examples() {
        let cover = [Cell::new(0.0, 0.1).unwrap(), Cell::new(0.5, 0.7).unwrap()];
        let r = luzin_probe(&identity(Cell::unit()), &cover).unwrap();
        assert_eq!(r.input_length, r.image_length);
        let r = luzin_probe(&square(), &[Cell::new(0.0, 1e-3).unwrap()]).unwrap();
        assert_eq!(r.image_length, 1e-6);
        assert!(luzin_probe(&square(), &[Cell::new(0.5, 1.5).unwrap()]).is_err());
    }

    #[test]
    fn zero_derivative_examples() {
        let r = zero_derivative_probe(&identity(Cell::unit()), &[0.5, 0.1], 1000);
        assert!(r.estimates.iter().all(|e| e.1 == 0.0));
        let r = zero_derivative_probe(&square(), &[0.5, 0.1, 0.01], 10000);
        for (e, m) in r.estimates {
            assert!((m - e / 2.0).abs() <= 1e-4 + 1e-12, "{e}: {m}");
        }
        let r = zero_derivative_probe(&cantor_psi(20), &[0.4, 0.1], 1000);
        assert!(r.estimates.iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn best_window_respects_room() {
        let xs = [0.0, 0.1, 0.2, 0.3, 0.4];
        let vs = [0.0, 1.0, 3.0, 3.5, 4.0];
        assert_eq!(best_window(&xs, &vs, 0, 4, 0.15), Some((1, 2)));
        assert_eq!(best_window(&xs, &vs, 0, 4, 0.05), None);
    }
}
