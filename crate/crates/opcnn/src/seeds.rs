//! Seed derivation: one root seed per run, split per purpose by label.
//!
//! Every source of randomness in the crate (parameter init, epoch shuffles,
//! dropout masks, synthetic data generation) draws from a `ChaCha8Rng` seeded
//! with `derive_seed(root, label)`, so runs are reproducible from a single
//! root seed and independent purposes never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Standard purpose labels used across the crate.
pub const INIT: &str = "init";
pub const SHUFFLE: &str = "shuffle";
pub const DROPOUT: &str = "dropout";
pub const DATA: &str = "data";

/// Derives a purpose-specific seed from a root seed and a label.
///
/// FNV-1a over the label bytes, mixed with the root through splitmix64.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ h)
}

/// A `ChaCha8Rng` for the given root seed and purpose label.
pub fn rng_for(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_produce_distinct_streams() {
        let a = derive_seed(7, INIT);
        let b = derive_seed(7, SHUFFLE);
        let c = derive_seed(8, INIT);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive_seed(42, "init"), derive_seed(42, "init"));
    }
}
