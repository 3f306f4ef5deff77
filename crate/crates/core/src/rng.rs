//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a master
//! seed and a task label. The label is hashed with 64-bit FNV-1a, combined
//! with the master seed and passed through the SplitMix64 finalizer. Both
//! steps are fixed integer arithmetic, so derived seeds are identical on
//! every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed for `label` from `seed`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a(label.as_bytes()).rotate_left(17))
}

/// Derive a child seed for an indexed task, e.g. `("rep", 7)`.
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, label) ^ splitmix64(index))
}

pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

pub fn indexed_stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_indexed(seed, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derived_seeds_are_pinned() {
        // Frozen values: any change here breaks reproducibility of stored
        // experiment outputs.
        assert_eq!(fnv1a(b""), FNV_OFFSET);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(derive_seed(1, "split"), derive_seed(1, "split"));
        assert_ne!(derive_seed(1, "split"), derive_seed(2, "split"));
        assert_ne!(derive_seed(1, "split"), derive_seed(1, "init"));
        assert_ne!(derive_indexed(1, "rep", 0), derive_indexed(1, "rep", 1));
    }

    #[test]
    fn streams_reproduce() {
        let a: Vec<u64> = (0..4).map({
            let mut r = stream(42, "x");
            move |_| r.next_u64()
        }).collect();
        let mut r = stream(42, "x");
        let b: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        assert_eq!(a, b);
    }
}
