//! Reproducible random streams.
//!
//! A stream is a ChaCha20 generator keyed by `seed` and positioned on the
//! ChaCha stream `stream_id`; two different stream ids never share
//! keystream, so they can be handed to independent workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derives a child stream from this stream's identity and `label`.
    ///
    /// Depends only on `(seed, stream_id, label)`, never on how much of the
    /// parent has been consumed, so per-trial children are stable under
    /// reordering or parallel execution.
    pub fn fork(&self, label: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(label.wrapping_add(0x6a09_e667_f3bc_c909)));
        RngStream::new(self.seed, id)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}
