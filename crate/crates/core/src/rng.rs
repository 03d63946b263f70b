//! Seed derivation for reproducible, independently replayable random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] (ChaCha8) seeded by
//! a 64-bit value. Child seeds are derived from a master seed and a list of
//! integer keys by [`derive_seed`], which folds each key through the
//! SplitMix64 finalizer. The derivation is stable across platforms and
//! releases, so a record's seed is enough to replay that trial alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `keys` into `master`, one SplitMix64 round per key.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc.rotate_left(23) ^ splitmix64(k))
    })
}

/// Stable integer key for a real parameter (its IEEE-754 bit pattern).
pub fn real_key(x: f64) -> u64 {
    x.to_bits()
}

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A stream for sub-task `index` of the task seeded by `seed`.
pub fn child_stream(seed: u64, index: u64) -> Stream {
    stream(derive_seed(seed, &[index]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_deterministic_and_key_sensitive() {
        assert_eq!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 2, 3]));
        assert_ne!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 3, 2]));
        assert_ne!(derive_seed(42, &[1]), derive_seed(43, &[1]));
        assert_ne!(derive_seed(0, &[]), derive_seed(0, &[0]));
    }

    #[test]
    fn frozen_value() {
        // Changing this breaks replay of previously written CSV files.
        assert_eq!(derive_seed(42, &[]), splitmix64(42));
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn streams_replay() {
        let a: Vec<u64> = (0..4).map(|_| stream(7).random()).collect();
        let mut s = stream(7);
        let b: Vec<u64> = (0..4).map(|_| s.random()).collect();
        assert_eq!(a[0], b[0]);
        let mut c1 = child_stream(7, 0);
        let mut c2 = child_stream(7, 1);
        assert_ne!(c1.random::<u64>(), c2.random::<u64>());
    }
}
