//! Seeded, splittable random streams.
//!
//! A stream is a ChaCha8 generator keyed by the run seed and positioned on a
//! stream id derived from `(replication, purpose)`. Two streams never share
//! output, and the sequence of draws for a given `(seed, replication,
//! purpose)` does not depend on what any other stream consumed, so
//! replications may run in any order or in parallel.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream feeds. Each purpose gets its own sub-stream per replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Arrivals = 0,
    Services = 1,
    Tags = 2,
    Thinning = 3,
    Aux = 4,
}

const PURPOSES: u64 = 8;

#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, replication: u64, purpose: Purpose) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(replication * PURPOSES + purpose as u64);
        Self { inner }
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
