//! Seeded RNG streams.
//!
//! All randomness in the toolkit flows from a single user-supplied seed;
//! independent streams are derived by hashing the seed together with a
//! domain tag, so adding a consumer never perturbs existing streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a deterministic RNG for `(seed, tags…)`.
pub fn seeded_rng(seed: u64, tags: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for tag in tags {
        hasher.update([0u8]);
        hasher.update(tag.as_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
