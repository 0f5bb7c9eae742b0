//! Counter-based derivation of independent random streams.
//!
//! Every random draw in a simulation comes from a stream keyed by the master
//! seed, a label, and a tuple of indices (SNR point, trial, ...). Results
//! therefore do not depend on how trials are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(master_seed: u64, label: &str, indices: &[u64]) -> StreamRng {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let digest = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
