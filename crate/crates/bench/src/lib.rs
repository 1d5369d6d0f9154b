//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` centres in `[0, 1]` with radii up to `max_radius`, from a fixed seed.
pub fn random_intervals(n: usize, max_radius: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| rng.gen::<f64>()).collect();
    let radii = (0..n).map(|_| max_radius * (1.0 - rng.gen::<f64>())).collect();
    (points, radii)
}
