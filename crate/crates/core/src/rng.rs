//! Seeded randomness shared by every stochastic step.
//!
//! All randomness goes through `ChaCha8Rng` (rand_chacha 0.9) so that a
//! given seed yields the same stream on every platform. Sub-seeds are
//! derived from a base seed and a textual label with SHA-256, which keeps
//! the split, autoencoder and booster streams independent of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from `base` and a label such as `"split"` or `"boost/round/3"`.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derived(base: u64, label: &str) -> Rng {
    seeded(derive_seed(base, label))
}
