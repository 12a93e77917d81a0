//! Deterministic seed derivation.
//!
//! Every random stream in the toolkit is a ChaCha8 generator seeded from a
//! digest of the master seed plus a label and a list of integer ids, so
//! streams are independent of one another, of thread scheduling and of the
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Mixes `base`, a stream label and a list of ids into a 64-bit seed.
pub fn derive_seed(base: u64, label: &str, ids: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for id in ids {
        hasher.update(id.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(base: u64, label: &str, ids: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, label, ids))
}

/// Hex digest of an arbitrary serialized configuration, used in provenance records.
pub fn digest_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
