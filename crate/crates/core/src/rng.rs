//! Counter-based random streams.
//!
//! Every random quantity is a function of `(master seed, stream id, draw
//! index)`: the master seed keys a ChaCha8 block function, the stream id
//! selects one of its 2^64 independent nonces, and draws advance the block
//! counter. Replication `r` owns stream `r`, so results do not depend on how
//! replications are spread over workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(master: u64, stream: u64) -> Self {
        SeedSpec { master, stream }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }

    /// A seed for an independent purpose (`tag`) tied to this one. The stream
    /// id is kept; the master key is re-derived.
    pub fn derive(&self, tag: u64) -> SeedSpec {
        SeedSpec {
            master: mix(self.master, tag),
            stream: self.stream,
        }
    }
}

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of two 64-bit keys.
pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b).rotate_left(17))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replay_is_identical() {
        let s = SeedSpec::new(42, 7);
        let a: Vec<u64> = s.rng().random_iter().take(16).collect();
        let b: Vec<u64> = s.rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_and_tags_differ() {
        let base = SeedSpec::new(42, 0);
        let x: u64 = base.rng().random();
        let y: u64 = SeedSpec::new(42, 1).rng().random();
        let z: u64 = base.derive(1).rng().random();
        assert_ne!(x, y);
        assert_ne!(x, z);
        assert_ne!(mix(1, 2), mix(2, 1));
    }
}
