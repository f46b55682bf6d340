//! Stable seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value derived by mixing a parent seed with a path of integer or string
//! components. The mixing is a fixed SplitMix64 finalizer over FNV-1a string
//! hashes, so derived seeds are stable across platforms, releases, and
//! thread schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of `s`.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a child seed from `parent` and one component.
pub fn derive(parent: u64, component: u64) -> u64 {
    mix64(mix64(parent) ^ component.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Derives a child seed from `parent` and a sequence of components.
pub fn derive_path(parent: u64, components: &[u64]) -> u64 {
    components.iter().fold(parent, |acc, &c| derive(acc, c))
}

pub fn derive_str(parent: u64, label: &str) -> u64 {
    derive(parent, hash_str(label))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maps 64 random bits to a uniform value in `[0, 1)` with 53 bits of precision.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: changing the mixing function silently changes every
        // published run, so pin a few outputs.
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(hash_str(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(derive_path(7, &[1, 2]), derive(derive(7, 1), 2));
    }

    #[test]
    fn distinct_components_give_distinct_seeds() {
        let seeds: std::collections::HashSet<u64> =
            (0..1000).map(|i| derive(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_str(1, "forest"), derive_str(1, "tree"));
    }

    #[test]
    fn unit_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }
}
