//! Counter-based random streams.
//!
//! A path is identified by `(master seed, path index)`; each of the two
//! driving noises gets its own ChaCha stream so the surplus and rate
//! Brownian motions are independent and every path can be regenerated in
//! isolation, whatever the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which noise source a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    /// Surplus Brownian motion `B` (plus the bridge uniforms of that path).
    Surplus = 0,
    /// Short-rate Brownian motion `W`.
    Rate = 1,
}

#[derive(Debug, Clone, Copy)]
pub struct PathStreams {
    seed: u64,
}

impl PathStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, path: u64, tag: StreamTag) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path.wrapping_mul(2).wrapping_add(tag as u64));
        rng
    }
}
