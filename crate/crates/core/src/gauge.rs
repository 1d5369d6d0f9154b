//! Gauges, δ-fineness and constructive Cousin divisions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cell::{Cell, PFamily, TaggedCell};
use crate::error::{Error, Result};

/// Default cap on bisection depth. Below roughly 2^-60 of the cell length
/// dyadic endpoints stop being representable.
pub const DEFAULT_DEPTH_CAP: usize = 60;

/// Default gauge floor, relative to the length of the cell being divided.
pub const DEFAULT_FLOOR_FACTOR: f64 = 1e-15;

/// Order in which candidate tags of a cell are tried.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagPolicy {
    #[default]
    MidpointFirst,
    EndpointFirst,
}

impl TagPolicy {
    pub fn other(self) -> Self {
        match self {
            TagPolicy::MidpointFirst => TagPolicy::EndpointFirst,
            TagPolicy::EndpointFirst => TagPolicy::MidpointFirst,
        }
    }

    /// Endpoint-first never tags at a midpoint: a cell neither endpoint can
    /// tag is bisected, so cells reaching a point of blow-up are tagged there.
    fn candidates(self) -> &'static [fn(&Cell) -> f64] {
        match self {
            TagPolicy::MidpointFirst => &[Cell::midpoint, Cell::lo, Cell::hi],
            TagPolicy::EndpointFirst => &[Cell::lo, Cell::hi],
        }
    }
}

impl std::str::FromStr for TagPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint-first" | "midpoint" => Ok(TagPolicy::MidpointFirst),
            "endpoint-first" | "endpoint" => Ok(TagPolicy::EndpointFirst),
            other => Err(Error::InvalidArgument(format!("unknown tag policy `{other}`"))),
        }
    }
}

/// A strictly positive function controlling how fine a tagged cell must be
/// around its tag.
///
/// `anchors` lists points where the gauge degenerates (typically the singular
/// set of an integrand); divisions are split there first so those points
/// become cell endpoints and can serve as tags.
#[derive(Clone)]
pub struct Gauge {
    delta: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    floor: Option<f64>,
    anchors: Vec<f64>,
}

impl Gauge {
    pub fn new(delta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            delta: Arc::new(delta),
            floor: None,
            anchors: Vec::new(),
        }
    }

    pub fn constant(radius: f64) -> Self {
        Self::new(move |_| radius)
    }

    /// Explicit floor; otherwise `DEFAULT_FLOOR_FACTOR` times the length of the divided cell.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = Some(floor);
        self
    }

    pub fn with_anchors(mut self, mut anchors: Vec<f64>) -> Self {
        anchors.sort_by(f64::total_cmp);
        anchors.dedup();
        self.anchors = anchors;
        self
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn floor(&self) -> Option<f64> {
        self.floor
    }

    /// The unclamped value δ(x).
    pub fn raw(&self, x: f64) -> f64 {
        (self.delta)(x)
    }

    /// δ(x) clamped below by `floor`; the flag reports whether clamping bit.
    pub fn radius(&self, x: f64, floor: f64) -> (f64, bool) {
        let r = (self.delta)(x);
        if r.is_nan() || r < floor {
            (floor, true)
        } else {
            (r, false)
        }
    }

    fn effective_floor(&self, i: &Cell) -> f64 {
        self.floor.unwrap_or(DEFAULT_FLOOR_FACTOR * i.length())
    }
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge")
            .field("floor", &self.floor)
            .field("anchors", &self.anchors)
            .finish_non_exhaustive()
    }
}

/// `J ⊆ [x − r, x + r]`.
#[inline]
pub(crate) fn within(c: &Cell, x: f64, r: f64) -> bool {
    x - c.lo() <= r && c.hi() - x <= r
}

/// True iff every `(J, x)` satisfies `J ⊆ [x − δ(x), x + δ(x)]`.
///
/// The gauge is evaluated unclamped unless it carries an explicit floor.
pub fn is_fine(p: &PFamily, g: &Gauge) -> bool {
    p.items().iter().all(|t| {
        let r = match g.floor {
            Some(fl) => g.radius(t.tag, fl).0,
            None => g.raw(t.tag),
        };
        r > 0.0 && within(&t.cell, t.tag, r)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisionOptions {
    pub policy: TagPolicy,
    pub depth_cap: usize,
}

impl Default for DivisionOptions {
    fn default() -> Self {
        Self {
            policy: TagPolicy::MidpointFirst,
            depth_cap: DEFAULT_DEPTH_CAP,
        }
    }
}

impl From<TagPolicy> for DivisionOptions {
    fn from(policy: TagPolicy) -> Self {
        Self {
            policy,
            ..Self::default()
        }
    }
}

/// A δ-fine P-division of a cell.
#[derive(Debug, Clone)]
pub struct PDivision {
    pub family: PFamily,
    /// Number of tags at which the gauge had to be clamped to the floor.
    pub clamped: usize,
    /// The floor that was enforced.
    pub floor: f64,
}

/// Builds a δ-fine P-division of `i` by recursive bisection.
///
/// A subcell is accepted as soon as one of its candidate tags (in policy
/// order) satisfies the fineness condition; otherwise it is bisected. The
/// cell is first split at the gauge anchors lying inside it.
pub fn cousin_division(i: &Cell, g: &Gauge, opts: impl Into<DivisionOptions>) -> Result<PDivision> {
    let opts = opts.into();
    let floor = g.effective_floor(i);
    let mut items = Vec::new();
    let mut clamped = 0usize;
    for piece in split_at_points(i, g.anchors()) {
        // Explicit stack, right child pushed first so cells come out lo-sorted.
        let mut stack = vec![(piece, 0usize)];
        while let Some((c, depth)) = stack.pop() {
            let accepted = opts.policy.candidates().iter().find_map(|tag| {
                let x = tag(&c);
                let (r, hit) = g.radius(x, floor);
                within(&c, x, r).then_some((x, hit))
            });
            match accepted {
                Some((tag, hit)) => {
                    clamped += usize::from(hit);
                    items.push(TaggedCell::new(c, tag));
                }
                None if depth >= opts.depth_cap => {
                    return Err(Error::DepthExceeded {
                        cap: opts.depth_cap,
                        cell: c,
                    })
                }
                None => {
                    let (l, r) = c.bisect();
                    stack.push((r, depth + 1));
                    stack.push((l, depth + 1));
                }
            }
        }
    }
    Ok(PDivision {
        family: PFamily::from_sorted_unchecked(items),
        clamped,
        floor,
    })
}

/// Splits `i` at the (sorted) points strictly inside it.
pub(crate) fn split_at_points(i: &Cell, points: &[f64]) -> Vec<Cell> {
    let mut out = Vec::with_capacity(points.len() + 1);
    let mut lo = i.lo();
    for &p in points {
        if lo < p && p < i.hi() {
            out.push(Cell::new(lo, p).expect("sorted interior split"));
            lo = p;
        }
    }
    out.push(Cell::new(lo, i.hi()).expect("sorted interior split"));
    out
}
