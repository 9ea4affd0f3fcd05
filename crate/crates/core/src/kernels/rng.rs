use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream. The pair `(seed, stream_id)` fully determines the
/// sequence; different stream ids give independent ChaCha streams.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
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

    /// A fresh handle on the same seed whose stream id mixes this handle's
    /// stream id with `keys`. Derivation ignores how much of this stream has
    /// been consumed, so tasks keyed by (chain, sweep, variable) get the same
    /// numbers no matter which thread runs them or in which order.
    pub fn derive(&self, keys: &[u64]) -> RngHandle {
        RngHandle::new(self.seed, stream_key(self.stream_id, keys))
    }
}

/// Order-sensitive 64-bit mix of `base` and `keys` (splitmix64 finalizer).
pub fn stream_key(base: u64, keys: &[u64]) -> u64 {
    let mut h = base ^ 0x9E37_79B9_7F4A_7C15;
    for &k in keys {
        h = mix64(h ^ mix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngHandle {
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
