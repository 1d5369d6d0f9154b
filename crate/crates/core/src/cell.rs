//! Cells, tagged families and additive cell functions.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// A nondegenerate compact interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    lo: f64,
    hi: f64,
}

impl Cell {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::DegenerateCell { lo, hi })
        }
    }

    /// The unit cell `[0, 1]`.
    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_cell(&self, other: &Cell) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Splits at the midpoint. Both halves share the midpoint bit-exactly.
    pub fn bisect(&self) -> (Cell, Cell) {
        let m = self.midpoint();
        (Cell { lo: self.lo, hi: m }, Cell { lo: m, hi: self.hi })
    }

    /// Splits at an interior point.
    pub fn split_at(&self, x: f64) -> Option<(Cell, Cell)> {
        (self.lo < x && x < self.hi).then(|| (Cell { lo: self.lo, hi: x }, Cell { lo: x, hi: self.hi }))
    }

    /// `[lo, x]`, the initial segment used by indefinite integrals.
    pub fn initial_segment(&self, x: f64) -> Result<Cell> {
        if !(self.lo < x && x <= self.hi) {
            return Err(Error::Domain {
                what: format!("x = {x}"),
                domain: *self,
            });
        }
        Cell::new(self.lo, x)
    }

    /// True iff the intersection with `other` is empty or a single point.
    pub fn nonoverlapping(&self, other: &Cell) -> bool {
        self.hi <= other.lo || other.hi <= self.lo
    }

    /// Closed-interval disjointness: shared endpoints count as intersecting.
    pub fn disjoint(&self, other: &Cell) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub(crate) fn cmp_lo(&self, other: &Cell) -> Ordering {
        self.lo.total_cmp(&other.lo).then(self.hi.total_cmp(&other.hi))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Length of a cell.
pub fn length(c: &Cell) -> f64 {
    c.length()
}

/// True iff the two cells meet in at most one point.
pub fn nonoverlapping(a: &Cell, b: &Cell) -> bool {
    a.nonoverlapping(b)
}

/// A cell together with a tag lying in it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedCell {
    pub cell: Cell,
    pub tag: f64,
}

impl TaggedCell {
    pub fn new(cell: Cell, tag: f64) -> Self {
        Self { cell, tag }
    }
}

/// A finite family of tagged, pairwise non-overlapping cells.
///
/// Insertion order is kept; every reduction walks the items sorted by `lo`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PFamily {
    items: Vec<TaggedCell>,
}

impl PFamily {
    pub fn items(&self) -> &[TaggedCell] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn into_items(self) -> Vec<TaggedCell> {
        self.items
    }

    /// Items ordered by left endpoint.
    pub fn sorted(&self) -> Vec<TaggedCell> {
        let mut v = self.items.clone();
        v.sort_by(|a, b| a.cell.cmp_lo(&b.cell).then(a.tag.total_cmp(&b.tag)));
        v
    }

    /// Total length of the body.
    pub fn body_length(&self) -> f64 {
        self.sorted().iter().map(|t| t.cell.length()).collect::<CompensatedSum>().value()
    }

    /// Families built by the partitioner are valid by construction.
    pub(crate) fn from_sorted_unchecked(items: Vec<TaggedCell>) -> Self {
        Self { items }
    }
}

/// Validates a sequence of tagged cells as a P-family.
pub fn validate_pfamily(items: Vec<TaggedCell>) -> Result<PFamily> {
    for (index, t) in items.iter().enumerate() {
        if !t.cell.contains(t.tag) {
            return Err(Error::Tag {
                index,
                tag: t.tag,
                cell: t.cell,
            });
        }
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[a].cell.cmp_lo(&items[b].cell).then(a.cmp(&b)));
    // Index of the cell reaching furthest right among those seen so far.
    let mut reach: Option<usize> = None;
    for &idx in &order {
        if let Some(r) = reach {
            let (prev, cur) = (&items[r], &items[idx]);
            if prev.cell == cur.cell && prev.tag == cur.tag {
                return Err(Error::Duplicate { index: r.max(idx) });
            }
            if cur.cell.lo() < prev.cell.hi() {
                return Err(Error::Overlap {
                    first: r.min(idx),
                    second: r.max(idx),
                });
            }
        }
        if reach.map_or(true, |r| items[idx].cell.hi() > items[r].cell.hi()) {
            reach = Some(idx);
        }
    }
    Ok(PFamily { items })
}

/// True iff the body of `p` is exactly `i`: sorted cells chain from `lo` to
/// `hi` with bit-identical shared endpoints.
pub fn is_pdivision(p: &PFamily, i: &Cell) -> bool {
    let sorted = p.sorted();
    let Some(first) = sorted.first() else {
        return false;
    };
    if first.cell.lo() != i.lo() {
        return false;
    }
    let mut end = first.cell.hi();
    for t in &sorted[1..] {
        if t.cell.lo() != end {
            return false;
        }
        end = t.cell.hi();
    }
    end == i.hi()
}

pub type PointFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An additive cell function, stored through its point function.
///
/// The value on a cell `J` is `F(max J) - F(min J)`; the point function is
/// normalised to vanish at the left end of the domain.
#[derive(Clone)]
pub struct AdditiveCellFn {
    point: PointFn,
    domain: Cell,
    offset: f64,
}

impl AdditiveCellFn {
    pub fn from_point_fn(domain: Cell, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let offset = f(domain.lo());
        Self {
            point: Arc::new(f),
            domain,
            offset,
        }
    }

    pub fn domain(&self) -> Cell {
        self.domain
    }

    /// The normalised point function, zero at `min` of the domain.
    pub fn point_value(&self, x: f64) -> f64 {
        (self.point)(x) - self.offset
    }

    /// `F(max J) - F(min J)`.
    pub fn cell_value(&self, j: &Cell) -> Result<f64> {
        if !self.domain.contains_cell(j) {
            return Err(Error::Domain {
                what: format!("cell {j}"),
                domain: self.domain,
            });
        }
        Ok((self.point)(j.hi()) - (self.point)(j.lo()))
    }
}

impl fmt::Debug for AdditiveCellFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdditiveCellFn").field("domain", &self.domain).finish_non_exhaustive()
    }
}

/// See [`AdditiveCellFn::cell_value`].
pub fn cell_value(f: &AdditiveCellFn, j: &Cell) -> Result<f64> {
    f.cell_value(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(lo: f64, hi: f64) -> Cell {
        Cell::new(lo, hi).unwrap()
    }

    #[test]
    fn lengths() {
        assert_eq!(length(&c(0.0, 1.0)), 1.0);
        assert_eq!(length(&c(-2.0, 3.0)), 5.0);
        assert_eq!(length(&c(0.25, 0.75)), 0.5);
    }

    #[test]
    fn degenerate_cells_rejected() {
        assert!(Cell::new(1.0, 1.0).is_err());
        assert!(Cell::new(2.0, 1.0).is_err());
        assert!(Cell::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn overlap_cases() {
        assert!(nonoverlapping(&c(0.0, 1.0), &c(1.0, 2.0)));
        assert!(nonoverlapping(&c(0.0, 1.0), &c(2.0, 3.0)));
        assert!(!nonoverlapping(&c(0.0, 1.0), &c(0.5, 2.0)));
    }

    #[test]
    fn validate_examples() {
        let ok = validate_pfamily(vec![
            TaggedCell::new(c(0.0, 0.5), 0.25),
            TaggedCell::new(c(0.5, 1.0), 0.75),
        ]);
        assert!(ok.is_ok());
        let overlap = validate_pfamily(vec![
            TaggedCell::new(c(0.0, 0.6), 0.1),
            TaggedCell::new(c(0.4, 1.0), 0.9),
        ]);
        assert_eq!(overlap, Err(Error::Overlap { first: 0, second: 1 }));
        let tag = validate_pfamily(vec![TaggedCell::new(c(0.0, 0.5), 0.7)]);
        assert!(matches!(tag, Err(Error::Tag { index: 0, .. })));
    }

    #[test]
    fn overlap_found_behind_a_long_cell() {
        let r = validate_pfamily(vec![
            TaggedCell::new(c(0.0, 10.0), 1.0),
            TaggedCell::new(c(10.0, 11.0), 10.5),
            TaggedCell::new(c(3.0, 4.0), 3.5),
        ]);
        assert!(matches!(r, Err(Error::Overlap { first: 0, second: 2 })));
    }

    #[test]
    fn duplicates_rejected() {
        let t = TaggedCell::new(c(0.0, 0.5), 0.25);
        assert_eq!(validate_pfamily(vec![t, t]), Err(Error::Duplicate { index: 1 }));
    }

    #[test]
    fn pdivision_examples() {
        let i = Cell::unit();
        let p = validate_pfamily(vec![
            TaggedCell::new(c(0.0, 0.5), 0.25),
            TaggedCell::new(c(0.5, 1.0), 1.0),
        ])
        .unwrap();
        assert!(is_pdivision(&p, &i));
        let gap = validate_pfamily(vec![TaggedCell::new(c(0.0, 0.5), 0.25)]).unwrap();
        assert!(!is_pdivision(&gap, &i));
        assert!(!is_pdivision(&PFamily::default(), &i));
    }

    #[test]
    fn cell_values() {
        let f = AdditiveCellFn::from_point_fn(Cell::unit(), |x| x * x);
        assert_eq!(f.cell_value(&c(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(f.cell_value(&c(0.5, 1.0)).unwrap(), 0.75);
        assert!(matches!(f.cell_value(&c(0.5, 1.5)), Err(Error::Domain { .. })));
    }

    #[test]
    fn oscillating_point_function_between_peaks() {
        let big_f = |x: f64| if x == 0.0 { 0.0 } else { x * x * (1.0 / (x * x)).sin() };
        let f = AdditiveCellFn::from_point_fn(Cell::unit(), big_f);
        let pi = std::f64::consts::PI;
        // Peaks x_k = (pi/2 + k pi)^(-1/2), where F(x_k) = (-1)^k / (pi/2 + k pi).
        let peak = |k: f64| (pi / 2.0 + k * pi).powf(-0.5);
        for k in [10.0, 11.0, 100.0] {
            let j = c(peak(k + 1.0), peak(k));
            let expected = (-1f64).powf(k) / (pi / 2.0 + k * pi) - (-1f64).powf(k + 1.0) / (pi / 2.0 + (k + 1.0) * pi);
            assert!((f.cell_value(&j).unwrap() - expected).abs() < 1e-12);
        }
        assert_eq!(f.point_value(0.0), 0.0);
    }

    fn random_split(lo: f64, hi: f64, cuts: Vec<f64>) -> Vec<Cell> {
        let mut pts: Vec<f64> = cuts.into_iter().map(|t| lo + t * (hi - lo)).filter(|&x| lo < x && x < hi).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut out = Vec::new();
        let mut a = lo;
        for p in pts.into_iter().chain(std::iter::once(hi)) {
            if p > a {
                out.push(c(a, p));
                a = p;
            }
        }
        out
    }

    proptest! {
        #[test]
        fn additivity(lo in -5.0f64..5.0, w in 0.01f64..5.0, cuts in proptest::collection::vec(0.0f64..1.0, 0..15)) {
            let hi = lo + w;
            let f = AdditiveCellFn::from_point_fn(c(-10.0, 10.0), |x| x.sin() * x * x + 3.0 * x);
            let parts = random_split(lo, hi, cuts);
            let n = parts.len() as f64;
            let total = f.cell_value(&c(lo, hi)).unwrap();
            let sum: f64 = parts.iter().map(|j| f.cell_value(j).unwrap()).collect::<CompensatedSum>().value();
            let mag = parts.iter().map(|j| f.point_value(j.hi()).abs().max(f.point_value(j.lo()).abs())).fold(1.0, f64::max);
            prop_assert!((sum - total).abs() <= 4.0 * n * f64::EPSILON * mag);
        }

        #[test]
        fn point_round_trip(x in 0.0f64..=1.0) {
            let f = AdditiveCellFn::from_point_fn(c(0.0, 1.0), |x| (3.0 * x).exp());
            if x > 0.0 {
                let j = c(0.0, x);
                prop_assert_eq!(f.cell_value(&j).unwrap(), f.point_value(x));
            }
        }

        #[test]
        fn nonoverlap_symmetric(a in -3.0f64..3.0, wa in 0.01f64..2.0, b in -3.0f64..3.0, wb in 0.01f64..2.0) {
            let (x, y) = (c(a, a + wa), c(b, b + wb));
            prop_assert_eq!(x.nonoverlapping(&y), y.nonoverlapping(&x));
        }

        #[test]
        fn pdivision_permutation_invariant(cuts in proptest::collection::vec(0.0f64..1.0, 0..12), seed in any::<u64>()) {
            let cells = random_split(0.0, 1.0, cuts);
            let mut items: Vec<TaggedCell> = cells.iter().map(|j| TaggedCell::new(*j, j.midpoint())).collect();
            let p = validate_pfamily(items.clone()).unwrap();
            let mut s = seed;
            for i in (1..items.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                items.swap(i, (s >> 33) as usize % (i + 1));
            }
            let q = validate_pfamily(items).unwrap();
            prop_assert!(is_pdivision(&p, &Cell::unit()));
            prop_assert!(is_pdivision(&q, &Cell::unit()));
        }
    }
}
