//! Seeded, shardable random streams.
//!
//! A [`RandomStream`] names a ChaCha8 keystream by `(seed, stream_id)`.
//! Parallel work never splits one stream; it derives child streams with
//! [`RandomStream::shard`] so results depend only on the shard plan.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        RandomStream { seed, stream_id }
    }

    /// Child stream number `index`, derived by a splitmix64 mix of the
    /// parent id; shards of shards are allowed.
    pub fn shard(self, index: u32) -> RandomStream {
        let mut z = self
            .stream_id
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index as u64 + 1);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RandomStream {
            seed: self.seed,
            stream_id: z ^ (z >> 31),
        }
    }

    pub fn rng(self) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        StreamRng {
            stream: self,
            draws: 0,
            inner,
        }
    }
}

/// Generator bound to a [`RandomStream`], counting channel draws.
#[derive(Debug, Clone)]
pub struct StreamRng {
    stream: RandomStream,
    draws: u64,
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn stream(&self) -> RandomStream {
        self.stream
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub(crate) fn bump_draw(&mut self) -> u64 {
        let d = self.draws;
        self.draws += 1;
        d
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for StreamRng {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_draws() {
        let mut a = RandomStream::new(7, 3).rng();
        let mut b = RandomStream::new(7, 3).rng();
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RandomStream::new(7, 3).rng();
        let mut b = RandomStream::new(7, 4).rng();
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn shards_are_distinct_from_parent() {
        let parent = RandomStream::new(1, 0);
        assert_ne!(parent.shard(0), parent);
        assert_ne!(parent.shard(0), parent.shard(1));
    }
}
