//! Gauss–Legendre rules viewed as tagged divisions.
//!
//! For an `n`-point Gauss–Legendre rule on a cell, cut the cell into `n`
//! consecutive subcells whose lengths are the weights. The Chebyshev–Markov–
//! Stieltjes separation theorem places node `i` strictly inside subcell `i`,
//! so the rule is exactly the Riemann sum of a tagged P-division of the cell.
//! The integrator uses this to refine accepted cells without leaving the
//! class of Riemann sums.

use std::sync::OnceLock;

use crate::cell::{Cell, TaggedCell};

#[derive(Debug, Clone)]
pub struct GaussRule {
    /// Nodes on `[-1, 1]`, increasing.
    nodes: Vec<f64>,
    /// Weights on `[-1, 1]`, summing to 2.
    weights: Vec<f64>,
    /// Cumulative weight fractions; `cuts[0] = 0`, `cuts[n] = 1`.
    cuts: Vec<f64>,
}

impl GaussRule {
    /// Computes the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        let mut cuts = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cuts.push(0.0);
        for w in &weights[..n - 1] {
            acc += w;
            cuts.push(acc / total);
        }
        cuts.push(1.0);
        Self { nodes, weights, cuts }
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Riemann sum over the rule's tagged division of `[lo, hi]`, with the
    /// sample function applied to each tag.
    #[inline]
    pub fn sum<E>(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
        let half = 0.5 * (hi - lo);
        let mid = lo + half;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x)?;
        }
        Ok(s * half)
    }

    /// The tagged division realised by the rule on `cell`.
    pub fn division(&self, cell: &Cell) -> Vec<TaggedCell> {
        let (lo, h) = (cell.lo(), cell.length());
        let half = 0.5 * h;
        let mid = lo + half;
        let n = self.points();
        (0..n)
            .map(|i| {
                let a = if i == 0 { lo } else { lo + h * self.cuts[i] };
                let b = if i + 1 == n { cell.hi() } else { lo + h * self.cuts[i + 1] };
                TaggedCell::new(Cell::new(a, b).expect("positive Gauss weight"), mid + half * self.nodes[i])
            })
            .collect()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The rule refining cells for the primary sum.
pub(crate) fn primary() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(16))
}

/// The rule refining cells for the independent cross-check sum.
pub(crate) fn secondary() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(15))
}
