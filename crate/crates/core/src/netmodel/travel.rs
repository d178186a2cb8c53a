use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric travel-time matrix with zero diagonal and off-diagonal entries
/// drawn uniformly from `1..=max_periods`.
pub fn gen_travel_matrix(n: usize, seed: u64, max_periods: u32) -> Vec<Vec<u32>> {
    let max = max_periods.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![vec![0u32; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(1..=max);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}
