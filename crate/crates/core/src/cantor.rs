//! Finite-stage Cantor function and the stage-n Cantor cover.

use crate::cell::Cell;

pub const DEFAULT_STAGE: u32 = 20;

/// Stage-`n` approximation of the Cantor function on `[0, 1]`: exact on the
/// removed middle thirds of the first `n` stages, linear on each of the `2^n`
/// remaining cells. Clamped outside `[0, 1]`. Uniform error at most `2^-(n+1)`.
pub fn cantor(x: f64, stage: u32) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut x = x;
    let mut value = 0.0;
    let mut scale = 1.0;
    for _ in 0..stage {
        if x <= 1.0 / 3.0 {
            x *= 3.0;
        } else if x < 2.0 / 3.0 {
            return value + 0.5 * scale;
        } else {
            value += 0.5 * scale;
            x = 3.0 * x - 2.0;
        }
        scale *= 0.5;
    }
    value + scale * x
}

/// Whether `x` lies in one of the `2^n` cells kept at stage `n`.
pub fn in_stage_cover(x: f64, stage: u32) -> bool {
    if !(0.0..=1.0).contains(&x) {
        return false;
    }
    let mut x = x;
    for _ in 0..stage {
        if x <= 1.0 / 3.0 {
            x *= 3.0;
        } else if x < 2.0 / 3.0 {
            return false;
        } else {
            x = 3.0 * x - 2.0;
        }
    }
    true
}

/// The `2^n` closed cells of length `3^-n` left at stage `n`.
pub fn cantor_cover(stage: u32) -> Vec<Cell> {
    let mut cells = vec![(0.0f64, 1.0f64)];
    for _ in 0..stage {
        cells = cells
            .into_iter()
            .flat_map(|(a, b)| {
                let t = (b - a) / 3.0;
                [(a, a + t), (b - t, b)]
            })
            .collect();
    }
    cells.into_iter().map(|(a, b)| Cell::new(a, b).expect("nondegenerate")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(cantor(0.0, 20), 0.0);
        assert_eq!(cantor(1.0, 20), 1.0);
        assert_eq!(cantor(0.5, 20), 0.5);
        assert_eq!(cantor(0.25, 40), cantor(0.25, 40));
        // 1/4 = 0.0202…₃ maps to 1/3.
        assert!((cantor(0.25, 40) - 1.0 / 3.0).abs() < 1e-12);
        assert!((cantor(0.8, 20) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn monotone_and_close_across_stages() {
        let mut prev = 0.0;
        for k in 0..=1000 {
            let x = k as f64 / 1000.0;
            let v = cantor(x, 20);
            assert!(v >= prev);
            prev = v;
            assert!((v - cantor(x, 30)).abs() <= 0.5f64.powi(21) + 1e-15);
        }
    }

    #[test]
    fn cover_shape() {
        let c = cantor_cover(5);
        assert_eq!(c.len(), 32);
        let total: f64 = c.iter().map(Cell::length).sum();
        assert!((total - (2.0f64 / 3.0).powi(5)).abs() < 1e-14);
        assert!(c.iter().all(|j| in_stage_cover(j.midpoint(), 5)));
        assert!(!in_stage_cover(0.5, 5));
    }
}
