//! Besicovitch decomposition of centred intervals and greedy disjoint selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cell::Cell;
use crate::error::{Error, Result};

/// Most families a decomposition may use.
pub const FAMILY_BUDGET: usize = 5;

/// `[center − radius, center + radius]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredInterval {
    center: f64,
    radius: f64,
}

impl CenteredInterval {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad interval: center {center}, radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    /// Closed intervals: a shared endpoint is not disjoint.
    pub fn disjoint(&self, other: &Self) -> bool {
        self.hi() < other.lo() || other.hi() < self.lo()
    }
}

/// Key for ordered maps over finite floats.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub families: Vec<Vec<CenteredInterval>>,
    /// Intervals kept by the greedy pass, in selection order.
    pub selected: usize,
}

/// Greedy by decreasing radius, keeping `J(x)` when `x` is not yet covered,
/// then first-fit colouring into pairwise disjoint families.
pub fn besicovitch_decompose(points: &[f64], radii: &[f64]) -> Result<Decomposition> {
    if points.len() != radii.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} radii",
            points.len(),
            radii.len()
        )));
    }
    let mut items = points
        .iter()
        .zip(radii)
        .map(|(&c, &r)| CenteredInterval::new(c, r))
        .collect::<Result<Vec<_>>>()?;
    items.sort_by(|a, b| b.radius.total_cmp(&a.radius).then(a.center.total_cmp(&b.center)));

    // No kept interval contains another kept centre, so ends are monotone in
    // the centre and the two neighbouring centres decide coverage.
    let mut kept: BTreeMap<Key, CenteredInterval> = BTreeMap::new();
    let mut order = Vec::new();
    for j in items {
        let x = j.center;
        let below = kept.range(..=Key(x)).next_back().map(|e| e.1);
        let above = kept.range(Key(x)..).next().map(|e| e.1);
        if below.is_some_and(|k| k.contains(x)) || above.is_some_and(|k| k.contains(x)) {
            continue;
        }
        kept.insert(Key(x), j);
        order.push(j);
    }

    let mut families: Vec<BTreeMap<Key, CenteredInterval>> = Vec::new();
    for j in &order {
        let slot = families.iter().position(|fam| {
            let below = fam.range(..=Key(j.center)).next_back().map(|e| e.1);
            let above = fam.range(Key(j.center)..).next().map(|e| e.1);
            below.is_none_or(|k| k.disjoint(j)) && above.is_none_or(|k| k.disjoint(j))
        });
        match slot {
            Some(s) => {
                families[s].insert(Key(j.center), *j);
            }
            None => {
                if families.len() == FAMILY_BUDGET {
                    return Err(Error::BudgetExceeded { budget: FAMILY_BUDGET });
                }
                families.push(BTreeMap::from([(Key(j.center), *j)]));
            }
        }
    }
    Ok(Decomposition {
        families: families.into_iter().map(|f| f.into_values().collect()).collect(),
        selected: order.len(),
    })
}

/// Every point lies in some interval of some family.
pub fn covers(d: &Decomposition, points: &[f64]) -> bool {
    let mut all: Vec<CenteredInterval> = d.families.iter().flatten().copied().collect();
    all.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    // Running max of hi over the sorted los answers "is x covered".
    let mut reach = Vec::with_capacity(all.len());
    let mut best = f64::NEG_INFINITY;
    for j in &all {
        best = best.max(j.hi());
        reach.push(best);
    }
    points.iter().all(|&x| {
        let k = all.partition_point(|j| j.lo() <= x);
        k > 0 && reach[k - 1] >= x
    })
}

/// Pairwise check of every family, quadratic in the family size.
pub fn families_disjoint(d: &Decomposition) -> bool {
    d.families
        .iter()
        .all(|fam| (0..fam.len()).all(|a| (a + 1..fam.len()).all(|b| fam[a].disjoint(&fam[b]))))
}

/// Greedy by decreasing length, keeping a cell when it does not overlap any
/// kept cell. Returned sorted by left endpoint.
pub fn vitali_greedy_select(cells: &[Cell]) -> Vec<Cell> {
    let mut order: Vec<Cell> = cells.to_vec();
    order.sort_by(|a, b| b.length().total_cmp(&a.length()));
    let mut kept: BTreeMap<Key, Cell> = BTreeMap::new();
    for c in order {
        let below = kept.range(..=Key(c.lo())).next_back().map(|e| e.1);
        let above = kept.range(Key(c.lo())..).next().map(|e| e.1);
        if below.is_none_or(|k| k.nonoverlapping(&c)) && above.is_none_or(|k| k.nonoverlapping(&c)) {
            kept.insert(Key(c.lo()), c);
        }
    }
    kept.into_values().collect()
}
