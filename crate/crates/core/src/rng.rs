//! Deterministic random-number streams.
//!
//! Every random draw in this crate comes from a ChaCha8 generator whose key is
//! derived from a 64-bit master seed and a textual tag, with an optional
//! stream index for families of related draws (restarts, scan cells, samples).
//! ChaCha8 is a counter-based generator with identical output on every
//! platform, so any result in this crate can be reproduced from the seeds
//! stored in its output files.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// splitmix64 finalizer; decorrelates nearby seed values.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for the stream identified by `(seed, tag, index)`.
pub fn stream_rng(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    let th = fnv1a(tag.as_bytes());
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&mix(seed).to_le_bytes());
    key[8..16].copy_from_slice(&mix(seed ^ th).to_le_bytes());
    key[16..24].copy_from_slice(&mix(th).to_le_bytes());
    key[24..32].copy_from_slice(&mix(seed.rotate_left(32).wrapping_add(th)).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// A single 64-bit value derived from `(seed, tag, index)`, for seeding
/// sub-components that take a plain seed.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    mix(mix(seed ^ fnv1a(tag.as_bytes())) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible() {
        let mut a = stream_rng(7, "unit", 3);
        let mut b = stream_rng(7, "unit", 3);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ_by_tag_and_index() {
        let mut base = stream_rng(7, "unit", 0);
        let mut other_tag = stream_rng(7, "tinu", 0);
        let mut other_idx = stream_rng(7, "unit", 1);
        let x = base.next_u64();
        assert_ne!(x, other_tag.next_u64());
        assert_ne!(x, other_idx.next_u64());
    }

    #[test]
    fn derived_seeds_are_stable() {
        assert_eq!(derive_seed(1, "a", 0), derive_seed(1, "a", 0));
        assert_ne!(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
        assert_ne!(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
    }
}
