//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`), keyed by the run's 64-bit seed and a fixed
//! stream id. Adding a consumer never perturbs the draws seen by another.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-known stream ids.
pub mod stream {
    pub const FTP: u64 = 1;
    pub const CBR: u64 = 2;
    pub const RED: u64 = 3;
    pub const CLT: u64 = 4;
}

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngState { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on the open interval (0, 1); safe to feed to a quantile function.
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }
}
