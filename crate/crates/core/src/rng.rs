//! Named deterministic random streams.
//!
//! Each subsystem draws from its own stream keyed by `(seed, label)`, so
//! changing how often one subsystem consumes randomness never shifts the
//! draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator behind every stream.
pub type SimRng = ChaCha8Rng;

pub const TRAFFIC: &str = "traffic";
pub const CHANNEL: &str = "channel";
pub const HARQ: &str = "harq";
pub const EXPLORATION: &str = "exploration";
pub const TIE_BREAK: &str = "tie-break";
pub const COIN: &str = "coin";

/// Returns an independent stream for `(seed, stream_id)`.
pub fn rng_stream(seed: u64, stream_id: &str) -> SimRng {
    let mut h = Sha256::new();
    h.update(b"sliceq/rng/v1");
    h.update(seed.to_le_bytes());
    h.update((stream_id.len() as u64).to_le_bytes());
    h.update(stream_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    SimRng::from_seed(key)
}

/// Stream for one episode of an environment subsystem.
pub fn episode_stream(seed: u64, stream_id: &str, episode: usize) -> SimRng {
    rng_stream(seed, &format!("{stream_id}/{episode}"))
}
