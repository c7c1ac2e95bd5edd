//! Portable randomness.
//!
//! Measurement selection and scene generation draw from SplitMix64, a
//! counter-based generator whose output is fully specified by its 64-bit
//! seed, so any implementation can reproduce the same indices:
//!
//! * bounded draws use multiply-shift: `(next_u64() as u128 * n) >> 64`;
//! * subsets of size `m` from `0..n` use Floyd's algorithm, visiting
//!   `j = n - m .. n` in order and drawing `t` uniformly from `0..=j`.
//!
//! Trial seeds are derived with [`derive_seed`].

use rand::RngCore;
use rand_xoshiro::SplitMix64;
use rand::SeedableRng;
use std::collections::BTreeSet;

pub fn splitmix(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Uniform draw from `0..n` (`n > 0`).
pub fn below(rng: &mut impl RngCore, n: u64) -> u64 {
    ((rng.next_u64() as u128 * n as u128) >> 64) as u64
}

/// Uniform `m`-subset of `0..n`, sorted ascending.
pub fn sample_sorted(rng: &mut impl RngCore, n: usize, m: usize) -> Vec<usize> {
    assert!(m <= n, "subset larger than population");
    if m == n {
        return (0..n).collect();
    }
    let mut chosen = BTreeSet::new();
    for j in (n - m)..n {
        let t = below(rng, j as u64 + 1) as usize;
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a base seed and a list of words into a child seed.
///
/// `h = mix64(base)`, then for each word `h = mix64(h ^ (word + GOLDEN))`.
/// `mix64` is the SplitMix64 finaliser.
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(mix64(base), |h, &w| mix64(h ^ w.wrapping_add(GOLDEN)))
}
