//! Riemann sums and the Kurzweil–Henstock integral.
//!
//! `kh_integrate` builds, for a decreasing sequence of tolerances, δ-fine
//! P-divisions of the cell and evaluates their Riemann sums. Each division is
//! obtained by Cousin bisection under the default gauge, with two extra rules:
//!
//! * a cell whose tag is a special point `s` (singular or exceptional) is only
//!   accepted once the dyadic panels next to it decay fast enough that the
//!   mass left inside the tagged cell is within the tail budget;
//! * every other accepted cell is refined into the tagged division of a
//!   Gauss rule (see [`crate::rule`]), and a cell is only accepted when that
//!   refinement agrees with the refinement of its two halves.
//!
//! Convergence is declared when the sums for two consecutive tolerances, and
//! the sums of two divisions with different tag placements, all agree.

use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{AdditiveCellFn, Cell, PFamily, TaggedCell};
use crate::error::{Error, Result};
use crate::gauge::{within, Gauge, TagPolicy, DEFAULT_DEPTH_CAP, DEFAULT_FLOOR_FACTOR};
use crate::integrand::Integrand;
use crate::rule::{self, GaussRule};
use crate::sum::CompensatedSum;

/// Knobs for [`kh_integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KhOptions {
    pub max_iterations: usize,
    pub depth_cap: usize,
    pub policy: TagPolicy,
    pub floor_factor: f64,
}

impl Default for KhOptions {
    fn default() -> Self {
        Self {
            max_iterations: 16,
            depth_cap: DEFAULT_DEPTH_CAP,
            policy: TagPolicy::MidpointFirst,
            floor_factor: DEFAULT_FLOOR_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Number of P-divisions whose Riemann sums were evaluated.
    pub divisions_used: usize,
    /// Shortest coarse cell in the final division.
    pub finest_cell: f64,
    /// Number of tagged cells in the final division.
    pub cells: usize,
    pub iterations: usize,
    /// Tags where the gauge had to be clamped to its floor.
    pub clamped: usize,
}

/// `Σ f(x)·|J|` over the family, in `lo` order with compensated summation.
pub fn riemann_sum(p: &PFamily, f: &Integrand) -> Result<f64> {
    let cell = f.cell();
    let mut acc = CompensatedSum::new();
    for t in p.sorted() {
        if !cell.contains(t.tag) {
            return Err(Error::Domain {
                what: format!("tag {}", t.tag),
                domain: cell,
            });
        }
        acc.add(f.sample(t.tag)? * t.cell.length());
    }
    Ok(acc.value())
}

/// `Σ |f(x)·|J| − F(J)|`: the quantity bounded by the Saks–Henstock lemma.
pub fn saks_henstock_indicator(f: &Integrand, p: &PFamily, reference: &AdditiveCellFn) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for t in p.sorted() {
        let exact = reference.cell_value(&t.cell)?;
        acc.add((f.sample(t.tag)? * t.cell.length() - exact).abs());
    }
    Ok(acc.value())
}

/// The structural gauge used by the integrator.
///
/// Away from the singular set `S` it is `min(h, c·dist(x, S))`. At a point of
/// `S` it is a fixed fraction of the cell; how close the integrator actually
/// gets is decided by the tail test. At an override point off `S` it is
/// small enough that the override, and the formula it replaces, move the sum
/// by at most `ε/(4n)` each.
#[derive(Debug, Clone)]
pub struct DefaultGauge {
    special: Vec<f64>,
    singular: Vec<f64>,
    special_radius: Vec<f64>,
    h_base: f64,
    slope: f64,
}

impl DefaultGauge {
    pub fn new(f: &Integrand, i: &Cell, eps: f64) -> Self {
        let len = i.length();
        let e = eps.max(f64::MIN_POSITIVE);
        let h_base = len * e.powf(0.25).min(0.125);
        let slope = 0.5 / (1.0 + (-e.log10()).max(0.0) / 16.0);
        let special: Vec<f64> = f.special_points().into_iter().filter(|&p| i.contains(p)).collect();
        let singular: Vec<f64> = special.iter().copied().filter(|&p| f.is_singular(p)).collect();
        let n = special.len().max(1) as f64;
        let special_radius = special
            .iter()
            .map(|&s| {
                let base = len * 0.125;
                let v = f.exception_value(s).unwrap_or(0.0);
                if f.is_singular(s) {
                    return if v != 0.0 { base.min(e / (4.0 * n * v.abs())) } else { base };
                }
                let jump = v.abs() + f.raw(s).abs();
                let carve = len * CARVE_FRACTION;
                if jump > 0.0 {
                    carve.min(e / (4.0 * n * jump))
                } else {
                    carve
                }
            })
            .collect();
        Self {
            special,
            singular,
            special_radius,
            h_base,
            slope,
        }
    }

    pub fn special_points(&self) -> &[f64] {
        &self.special
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular
    }

    #[inline]
    pub fn radius(&self, x: f64) -> f64 {
        if self.special.is_empty() {
            return self.h_base;
        }
        let idx = self.special.partition_point(|&p| p < x);
        if idx < self.special.len() && self.special[idx] == x {
            return self.special_radius[idx];
        }
        let idx = self.singular.partition_point(|&p| p < x);
        let mut d = f64::INFINITY;
        if idx < self.singular.len() {
            d = self.singular[idx] - x;
        }
        if idx > 0 {
            d = d.min(x - self.singular[idx - 1]);
        }
        self.h_base.min(self.slope * d)
    }

    pub fn into_gauge(self) -> Gauge {
        let anchors = self.special.clone();
        Gauge::new(move |x| self.radius(x)).with_anchors(anchors)
    }
}

/// Upper bound on the half-width of a cell tagged at an override point, as a
/// fraction of the cell being integrated.
const CARVE_FRACTION: f64 = 1e-9;

/// The default gauge for `f` on `i` at tolerance `eps`.
pub fn default_gauge(f: &Integrand, i: &Cell, eps: f64) -> Gauge {
    DefaultGauge::new(f, i, eps).into_gauge()
}

fn rules(policy: TagPolicy) -> (&'static GaussRule, &'static GaussRule) {
    match policy {
        TagPolicy::MidpointFirst => (rule::primary(), rule::secondary()),
        TagPolicy::EndpointFirst => (rule::secondary(), rule::primary()),
    }
}

/// A coarse cell of a built division, kept only when materialising.
#[derive(Debug, Clone, Copy)]
enum Coarse {
    /// Tagged at a special point.
    Tail { cell: Cell, tag: f64 },
    /// Accepted regular cell, refined through its two halves.
    Refined { cell: Cell },
    /// Remnant of a refined cell after an override cell was cut out.
    Plain { cell: Cell },
}

#[derive(Debug)]
enum BuildError {
    Hard(Error),
    /// Contributions next to a special point never became small.
    Tail { point: f64 },
}

impl From<Error> for BuildError {
    fn from(e: Error) -> Self {
        BuildError::Hard(e)
    }
}

struct Build {
    /// Panel sums of the primary division.
    primary: Vec<f64>,
    /// Panel sums of the cross-check division.
    secondary: Vec<f64>,
    cells: usize,
    finest: f64,
    clamped: usize,
    coarse: Vec<Coarse>,
}

struct Engine<'a> {
    f: &'a Integrand,
    gauge: &'a DefaultGauge,
    primary: &'static GaussRule,
    secondary: &'static GaussRule,
    /// Budget per unit length for the disagreement of refined cells.
    density: f64,
    tail_tol: f64,
    noise: f64,
    floor: f64,
    depth_cap: usize,
    cells: usize,
    finest: f64,
    clamped: usize,
    keep: bool,
    coarse: Vec<Coarse>,
    tails: Vec<Cell>,
    /// Interior breaks, sorted; regular cells never straddle one.
    cuts: &'a [f64],
}

/// Relative disagreement below which a non-improving refinement is treated as
/// rounding noise in the integrand.
const NOISE_LEVEL: f64 = 1e-8;


/// One accepted coarse cell's panel and its contribution to both sums.
type Terms = (usize, f64, f64);

impl<'a> Engine<'a> {
    #[inline]
    fn gauss(&self, rule: &GaussRule, c: &Cell) -> Result<f64> {
        rule.sum(c.lo(), c.hi(), |x| self.f.sample_regular(x))
    }

    fn structurally_fine(&self, c: &Cell) -> bool {
        [c.midpoint(), c.lo(), c.hi()]
            .into_iter()
            .any(|x| within(c, x, self.gauge.radius(x)))
    }

    fn panel_of(&self, x: f64) -> usize {
        self.cuts.partition_point(|&c| c <= x)
    }

    /// The cell cut at the breaks inside it.
    fn split_at_cuts(&self, c: Cell) -> Vec<Cell> {
        let a = self.cuts.partition_point(|&x| x <= c.lo());
        let b = self.cuts.partition_point(|&x| x < c.hi());
        let mut out = Vec::with_capacity(b - a + 1);
        let mut lo = c.lo();
        for &x in &self.cuts[a..b] {
            out.extend(Cell::new(lo, x).ok());
            lo = x;
        }
        out.extend(Cell::new(lo, c.hi()).ok());
        out
    }

    fn child(&self) -> Engine<'a> {
        Engine {
            cells: 0,
            finest: f64::INFINITY,
            clamped: 0,
            coarse: Vec::new(),
            tails: Vec::new(),
            ..*self
        }
    }

    fn absorb(&mut self, other: Engine<'a>) {
        self.cells += other.cells;
        self.finest = self.finest.min(other.finest);
        self.clamped += other.clamped;
        self.coarse.extend(other.coarse);
        self.tails.extend(other.tails);
    }

    fn regular(&mut self, c: Cell, out: &mut Vec<Terms>) -> Result<()> {
        let parts = self.split_at_cuts(c);
        if parts.len() == 1 {
            return self.regular_one(c, out);
        }
        let done = parts
            .par_iter()
            .map(|&p| {
                let mut e = self.child();
                let mut terms = Vec::new();
                e.regular_one(p, &mut terms)?;
                Ok((e, terms))
            })
            .collect::<Result<Vec<_>>>()?;
        for (e, terms) in done {
            self.absorb(e);
            out.extend(terms);
        }
        Ok(())
    }

    fn regular_one(&mut self, c: Cell, out: &mut Vec<Terms>) -> Result<()> {
        let whole = self.gauss(self.primary, &c)?;
        let panel = self.panel_of(c.midpoint());
        self.regular_with(c, whole, f64::INFINITY, 0, panel, out)
    }

    #[allow(clippy::too_many_arguments)]
    fn regular_with(
        &mut self,
        c: Cell,
        whole: f64,
        parent: f64,
        depth: usize,
        panel: usize,
        out: &mut Vec<Terms>,
    ) -> Result<()> {
        let (l, r) = c.bisect();
        let gl = self.gauss(self.primary, &l)?;
        let gr = self.gauss(self.primary, &r)?;
        let len = c.length();
        let indicator = (whole - (gl + gr)).abs();
        let mass = gl.abs() + gr.abs();
        // A resolved cell gains many digits per bisection; an indicator that is
        // tiny relative to the mass but no longer shrinking is evaluation noise.
        let stagnant = indicator <= self.noise * mass && indicator > parent / 8.0;
        let settled = indicator <= self.density * len || indicator <= 64.0 * f64::EPSILON * mass || stagnant;
        let tiny = len <= 2.0 * self.floor;
        if (settled && self.structurally_fine(&c)) || tiny {
            if tiny && !settled {
                self.clamped += 1;
            }
            let alt = self.gauss(self.secondary, &c)?;
            out.push((panel, gl + gr, alt));
            self.cells += 2 * self.primary.points();
            self.finest = self.finest.min(len);
            if self.keep {
                self.coarse.push(Coarse::Refined { cell: c });
            }
            return Ok(());
        }
        if depth >= self.depth_cap {
            return Err(Error::DepthExceeded {
                cap: self.depth_cap,
                cell: c,
            });
        }
        self.regular_with(l, gl, indicator, depth + 1, panel, out)?;
        self.regular_with(r, gr, indicator, depth + 1, panel, out)
    }

    /// Piece with a special point at one end: peel dyadic panels off the far
    /// side until the tagged cell next to the point may be accepted.
    fn tail(&mut self, piece: Cell, at_lo: bool, out: &mut Vec<Terms>) -> std::result::Result<(), BuildError> {
        let s = if at_lo { piece.lo() } else { piece.hi() };
        let radius = self.gauge.radius(s).max(self.floor);
        let tol = self.tail_tol;
        let mut cur = piece;
        let mut panels: Vec<Vec<Terms>> = Vec::new();
        let mut panel_cells: Vec<Vec<Coarse>> = Vec::new();
        let mut recent = [f64::INFINITY; 3];
        for depth in 0..=self.depth_cap {
            let len = cur.length();
            if len <= radius && tail_settled(recent, tol) {
                let value = self.f.sample(s)?;
                // Spread over the panels the tagged cell spans.
                let mut terms: Vec<Terms> = self
                    .split_at_cuts(cur)
                    .into_iter()
                    .map(|p| (self.panel_of(p.midpoint()), value * p.length(), value * p.length()))
                    .collect();
                self.cells += 1;
                self.finest = self.finest.min(len);
                if self.gauge.radius(s) < self.floor {
                    self.clamped += 1;
                }
                self.tails.push(cur);
                let tail_coarse = Coarse::Tail { cell: cur, tag: s };
                if at_lo {
                    out.append(&mut terms);
                    if self.keep {
                        self.coarse.push(tail_coarse);
                    }
                    for (p, c) in panels.into_iter().rev().zip(panel_cells.into_iter().rev()) {
                        out.extend(p);
                        self.coarse.extend(c);
                    }
                } else {
                    for (p, c) in panels.into_iter().zip(panel_cells) {
                        out.extend(p);
                        self.coarse.extend(c);
                    }
                    out.append(&mut terms);
                    if self.keep {
                        self.coarse.push(tail_coarse);
                    }
                }
                return Ok(());
            }
            if depth == self.depth_cap {
                break;
            }
            let (l, r) = cur.bisect();
            let (inner, outer) = if at_lo { (l, r) } else { (r, l) };
            let mut terms = Vec::new();
            let saved = std::mem::take(&mut self.coarse);
            self.regular(outer, &mut terms)?;
            panel_cells.push(std::mem::replace(&mut self.coarse, saved));
            let value = terms.iter().map(|t| t.1).collect::<CompensatedSum>().value();
            recent = [value, recent[0], recent[1]];
            panels.push(terms);
            cur = inner;
        }
        Err(BuildError::Tail { point: s })
    }
}

/// Decides whether the mass left next to a special point is negligible, from
/// the three adjacent panels `recent = [nearest, next, next]`.
///
/// Panels of a decaying tail shrink roughly geometrically, so the remaining
/// mass is estimated as `|P1|·ρ/(1−ρ)`; this is exact for power-law
/// singularities. The ratio is taken over pairs of panels so that an
/// oscillating tail whose nearest panel happens to be small is not taken as
/// settled, and `|P1|` itself must not exceed a fixed multiple of the budget.
fn tail_settled(recent: [f64; 3], tol: f64) -> bool {
    let [p1, p2, p3] = recent.map(f64::abs);
    if !(p1.is_finite() && p2.is_finite() && p3.is_finite()) || p1 > 16.0 * tol {
        return false;
    }
    if p2 + p3 == 0.0 {
        return p1 <= tol;
    }
    let ratio = (p1 + p2) / (p2 + p3);
    ratio <= 0.9 && p1 * ratio / (1.0 - ratio) <= tol
}

/// Splits `i` at the singular points; returns each piece with flags for
/// singular endpoints.
fn pieces(i: &Cell, singular: &[f64]) -> Vec<(Cell, bool, bool)> {
    let cuts: Vec<f64> = singular.iter().copied().filter(|&p| i.lo() < p && p < i.hi()).collect();
    let is_singular = |x: f64| singular.binary_search_by(|p| p.total_cmp(&x)).is_ok();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = i.lo();
    for p in cuts.into_iter().chain(std::iter::once(i.hi())) {
        let c = Cell::new(lo, p).expect("sorted cuts");
        out.push((c, is_singular(lo), is_singular(p)));
        lo = p;
    }
    out
}

fn build(
    f: &Integrand,
    i: &Cell,
    breaks: &[f64],
    eps: f64,
    opts: &KhOptions,
    keep: bool,
) -> std::result::Result<Build, BuildError> {
    let gauge = DefaultGauge::new(f, i, eps);
    let singular = gauge.singular_points().to_vec();
    let parts = pieces(i, &singular);
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&p| i.lo() < p && p < i.hi()).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let sides = parts.iter().map(|p| usize::from(p.1) + usize::from(p.2)).sum::<usize>().max(1);
    let (primary, secondary) = rules(opts.policy);
    let new_engine = || Engine {
        f,
        gauge: &gauge,
        primary,
        secondary,
        density: 0.5 * eps / i.length(),
        tail_tol: eps / sides as f64,
        noise: NOISE_LEVEL,
        floor: opts.floor_factor * i.length(),
        depth_cap: opts.depth_cap,
        cells: 0,
        finest: f64::INFINITY,
        clamped: 0,
        keep,
        coarse: Vec::new(),
        tails: Vec::new(),
        cuts: &cuts,
    };
    let panels = cuts.len() + 1;
    // Pieces are independent; results are merged in lo order so the sums do
    // not depend on the thread count.
    let done = parts
        .par_iter()
        .map(|&(piece, lo_special, hi_special)| {
            let mut engine = new_engine();
            let mut terms = Vec::new();
            match (lo_special, hi_special) {
                (false, false) => engine.regular(piece, &mut terms)?,
                (true, false) => engine.tail(piece, true, &mut terms)?,
                (false, true) => engine.tail(piece, false, &mut terms)?,
                (true, true) => {
                    let (l, r) = piece.bisect();
                    engine.tail(l, true, &mut terms)?;
                    engine.tail(r, false, &mut terms)?;
                }
            }
            Ok((terms, engine))
        })
        .collect::<std::result::Result<Vec<_>, BuildError>>()?;
    let mut primary_sums = vec![CompensatedSum::new(); panels];
    let mut secondary_sums = vec![CompensatedSum::new(); panels];
    let mut out = Build {
        primary: Vec::new(),
        secondary: Vec::new(),
        cells: 0,
        finest: f64::INFINITY,
        clamped: 0,
        coarse: Vec::new(),
    };
    let mut tails = Vec::new();
    for (terms, engine) in done {
        for (panel, a, b) in terms {
            primary_sums[panel].add(a);
            secondary_sums[panel].add(b);
        }
        out.cells += engine.cells;
        out.finest = out.finest.min(engine.finest);
        out.clamped += engine.clamped;
        out.coarse.extend(engine.coarse);
        tails.extend(engine.tails);
    }

    let carves = override_cells(f, i, &gauge, &tails)?;
    for &(cell, tag, v) in &carves {
        let fx = f.raw(tag);
        // Split at the tag so each side lands in its own panel.
        for part in [Cell::new(cell.lo(), tag), Cell::new(tag, cell.hi())].into_iter().flatten() {
            let panel = cuts.partition_point(|&c| c <= part.midpoint());
            let term = (v - fx) * part.length();
            primary_sums[panel].add(term);
            secondary_sums[panel].add(term);
        }
        out.cells += 1;
        out.finest = out.finest.min(cell.length());
    }
    if keep {
        out.coarse = carve_coarse(std::mem::take(&mut out.coarse), &carves);
    }
    out.primary = primary_sums.iter().map(CompensatedSum::value).collect();
    out.secondary = secondary_sums.iter().map(CompensatedSum::value).collect();
    Ok(out)
}

/// Cells tagged at override points off the singular set, with the override
/// value. The sums were built from the formula alone; each such cell swaps
/// `f(s)·|C|` for `v·|C|`. Overrides already inside a tail cell are skipped.
fn override_cells(f: &Integrand, i: &Cell, gauge: &DefaultGauge, tails: &[Cell]) -> Result<Vec<(Cell, f64, f64)>> {
    let pts: Vec<(f64, f64)> = f
        .null_exceptions()
        .iter()
        .copied()
        .filter(|&(x, _)| i.contains(x) && !f.is_singular(x) && !tails.iter().any(|t| t.contains(x)))
        .collect();
    let mut out = Vec::with_capacity(pts.len());
    for (k, &(x, v)) in pts.iter().enumerate() {
        if !f.raw(x).is_finite() {
            return Err(Error::NonFiniteSample { x });
        }
        let r = gauge.radius(x);
        let mut lo = (x - r).max(i.lo());
        let mut hi = (x + r).min(i.hi());
        if k > 0 {
            lo = lo.max(0.5 * (pts[k - 1].0 + x));
        }
        if k + 1 < pts.len() {
            hi = hi.min(0.5 * (x + pts[k + 1].0));
        }
        for t in tails {
            if t.hi() <= x {
                lo = lo.max(t.hi());
            } else if t.lo() >= x {
                hi = hi.min(t.lo());
            }
        }
        if let Ok(c) = Cell::new(lo, hi) {
            out.push((c, x, v));
        }
    }
    Ok(out)
}

/// Cuts the override cells out of the refined cells and merges them in.
fn carve_coarse(coarse: Vec<Coarse>, carves: &[(Cell, f64, f64)]) -> Vec<Coarse> {
    if carves.is_empty() {
        return coarse;
    }
    let mut out = Vec::with_capacity(coarse.len() + 3 * carves.len());
    for c in coarse {
        let cell = match c {
            Coarse::Tail { .. } => {
                out.push(c);
                continue;
            }
            Coarse::Refined { cell } | Coarse::Plain { cell } => cell,
        };
        let hits: Vec<Cell> = carves
            .iter()
            .map(|k| k.0)
            .filter(|k| k.lo() < cell.hi() && k.hi() > cell.lo())
            .collect();
        if hits.is_empty() {
            out.push(c);
            continue;
        }
        let mut lo = cell.lo();
        for k in hits {
            if let Ok(rest) = Cell::new(lo, k.lo()) {
                out.push(Coarse::Plain { cell: rest });
            }
            lo = lo.max(k.hi());
        }
        if let Ok(rest) = Cell::new(lo, cell.hi()) {
            out.push(Coarse::Plain { cell: rest });
        }
    }
    out.extend(carves.iter().map(|&(cell, tag, _)| Coarse::Tail { cell, tag }));
    out.sort_by(|a, b| coarse_lo(a).total_cmp(&coarse_lo(b)));
    out
}

fn coarse_lo(c: &Coarse) -> f64 {
    match c {
        Coarse::Tail { cell, .. } | Coarse::Refined { cell } | Coarse::Plain { cell } => cell.lo(),
    }
}

fn prefix(v: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    v.iter()
        .map(|&x| {
            acc.add(x);
            acc.value()
        })
        .collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Converged panel integrals over the cells between consecutive breaks.
#[derive(Debug, Clone)]
pub(crate) struct PanelIntegrals {
    pub panels: Vec<f64>,
    pub result: IntegralResult,
}

/// Integrates `f` over `i` split at `breaks`, declaring convergence on the
/// running totals at every break.
pub(crate) fn integrate_panels(
    f: &Integrand,
    i: &Cell,
    breaks: &[f64],
    tol: f64,
    opts: &KhOptions,
) -> Result<PanelIntegrals> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !f.cell().contains_cell(i) {
        return Err(Error::Domain {
            what: format!("cell {i}"),
            domain: f.cell(),
        });
    }
    let mut breaks: Vec<f64> = breaks.iter().copied().filter(|&b| i.lo() < b && b < i.hi()).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut previous: Option<Vec<f64>> = None;
    let mut best = f64::NAN;
    let mut estimate = f64::INFINITY;
    let mut divisions = 0;
    for k in 0..opts.max_iterations {
        let eps = tol * 0.5f64.powi(k as i32);
        let b = match build(f, i, &breaks, eps, opts, false) {
            Ok(b) => b,
            Err(BuildError::Hard(e)) => return Err(e),
            Err(BuildError::Tail { point }) => {
                return Err(Error::NoConvergence {
                    iterations: k,
                    best,
                    estimate,
                    reason: format!("contributions next to x = {point} do not decay"),
                })
            }
        };
        divisions += 2;
        let running = prefix(&b.primary);
        let alternate = prefix(&b.secondary);
        best = *running.last().expect("at least one panel");
        let cross = max_gap(&running, &alternate);
        if let Some(prev) = &previous {
            let step = max_gap(&running, prev);
            estimate = step.max(cross);
            if step < tol && cross < tol {
                return Ok(PanelIntegrals {
                    panels: b.primary,
                    result: IntegralResult {
                        value: best,
                        error_estimate: estimate,
                        divisions_used: divisions,
                        finest_cell: b.finest,
                        cells: b.cells,
                        iterations: k + 1,
                        clamped: b.clamped,
                    },
                });
            }
        }
        previous = Some(running);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        best,
        estimate,
        reason: "sums did not stabilise".into(),
    })
}

/// The Kurzweil–Henstock integral of `f` over `i` to within `tol`.
pub fn kh_integrate(f: &Integrand, i: &Cell, tol: f64) -> Result<IntegralResult> {
    kh_integrate_with(f, i, tol, &KhOptions::default())
}

pub fn kh_integrate_with(f: &Integrand, i: &Cell, tol: f64, opts: &KhOptions) -> Result<IntegralResult> {
    integrate_panels(f, i, &[], tol, opts).map(|p| p.result)
}

/// The tagged P-division whose Riemann sum the integrator evaluates at
/// tolerance `eps` with the given tag policy.
pub fn kh_division(f: &Integrand, i: &Cell, eps: f64, policy: TagPolicy) -> Result<PFamily> {
    let opts = KhOptions {
        policy,
        ..KhOptions::default()
    };
    let b = match build(f, i, &[], eps, &opts, true) {
        Ok(b) => b,
        Err(BuildError::Hard(e)) => return Err(e),
        Err(BuildError::Tail { point }) => {
            return Err(Error::NoConvergence {
                iterations: 0,
                best: f64::NAN,
                estimate: f64::INFINITY,
                reason: format!("contributions next to x = {point} do not decay"),
            })
        }
    };
    let (rule, _) = rules(policy);
    let mut items = Vec::new();
    for c in b.coarse {
        match c {
            Coarse::Tail { cell, tag } => items.push(TaggedCell::new(cell, tag)),
            Coarse::Refined { cell } => {
                let (l, r) = cell.bisect();
                items.extend(rule.division(&l));
                items.extend(rule.division(&r));
            }
            Coarse::Plain { cell } => items.extend(rule.division(&cell)),
        }
    }
    Ok(PFamily::from_sorted_unchecked(items))
}
