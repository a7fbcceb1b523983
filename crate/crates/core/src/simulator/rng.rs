//! Named, counter-indexed random substreams.
//!
//! Every random draw in a run comes from `substream(seed, label, index)`, so
//! results do not depend on how chunks are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn digest(seed: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(seed, label, index))
}

/// A child seed for a named sub-run.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let d = digest(seed, label, index);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
