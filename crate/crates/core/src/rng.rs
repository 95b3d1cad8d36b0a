//! Seeded random streams.
//!
//! Every phase of the pipeline draws from its own stream derived from one
//! master seed and a textual label, e.g. `"train/CA"` or `"sim/WL,CA/17"`.
//! The derivation is `ChaCha8(SHA-256(master_le_bytes || label))`, so a
//! stream depends only on `(master, label)` and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The random generator used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Derives the stream for `label` under `master`.
pub fn stream(master: u64, label: &str) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Derives a 64-bit sub-seed for `label` under `master`.
pub fn sub_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
