//! Deterministic seed derivation for parallel Monte Carlo work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a root seed and a path of indices into one 64-bit stream seed.
///
/// Each index is absorbed with a fresh mixing round, so `(seed, n, trial)`
/// never collides with `(seed, n', trial')` in practice, and adding new
/// indices leaves existing streams untouched.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_for(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0.
        assert_eq!(mix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(mix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let seeds: HashSet<u64> = (0..50u64)
            .flat_map(|n| (0..200u64).map(move |t| derive_seed(7, &[n, t])))
            .collect();
        assert_eq!(seeds.len(), 50 * 200);
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
        assert_ne!(derive_seed(7, &[3, 4]), derive_seed(7, &[4, 3]));
        let a: u64 = rng_for(1, &[2]).random();
        let b: u64 = rng_for(1, &[2]).random();
        assert_eq!(a, b);
    }
}
