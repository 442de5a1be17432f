//! SplitMix64 and the seed derivation used for random entity selection.
//!
//! SplitMix64 (Steele, Lea and Flood; Vigna's reference constants) is small
//! enough to reimplement in any language, which keeps sampled payloads
//! reproducible outside this crate.

use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"reinsert-sample-v1";

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform value in `0..n` by rejection sampling.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        // 2^64 mod n
        let rem = (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if rem == 0 || x < 0u64.wrapping_sub(rem) {
                return x % n;
            }
        }
    }
}

/// Draw `count` items without replacement via a partial Fisher-Yates
/// shuffle, in draw order. `count` is clamped to `items.len()`.
pub fn sample_without_replacement<T: Clone>(
    items: &[T],
    count: usize,
    rng: &mut SplitMix64,
) -> Vec<T> {
    let mut pool = items.to_vec();
    let count = count.min(pool.len());
    for i in 0..count {
        let j = i + rng.below((pool.len() - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool
}

/// Seed for one (run, document, strategy) triple: the first eight bytes,
/// little-endian, of
/// `SHA-256("reinsert-sample-v1" || run_seed as u64 LE || strategy code || 0x00 || document id)`.
pub fn derive_seed(run_seed: u64, document_id: &str, strategy_code: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(run_seed.to_le_bytes());
    hasher.update(strategy_code.as_bytes());
    hasher.update([0u8]);
    hasher.update(document_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
