use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Generator for one sample in one epoch, independent of visiting order.
pub fn sample_rng(seed: u64, volume_id: &str, slice_index: usize, epoch: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((volume_id.len() as u64).to_le_bytes());
    h.update(volume_id.as_bytes());
    h.update((slice_index as u64).to_le_bytes());
    h.update((epoch as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Generator for a named stream derived from a base seed.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    sample_rng(seed, stream, usize::MAX, usize::MAX)
}
