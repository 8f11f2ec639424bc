use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator used everywhere in the crate.
pub type LabRng = ChaCha8Rng;

/// A master seed plus a stream id. ChaCha streams with the same key are
/// independent, and the output depends only on the pair, never on which
/// thread draws from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        SeedSpec { seed, stream }
    }

    pub fn rng(&self) -> LabRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Stream for replica `index` of this spec. Distinct specs get distinct
    /// keys, so replica streams of different specs never coincide.
    pub fn replica(&self, index: u64) -> SeedSpec {
        SeedSpec {
            seed: splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_f42d_4c95_7f2d))),
            stream: index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_spec_same_stream() {
        let a: Vec<u64> = SeedSpec::new(7, 3).rng().random_iter().take(8).collect();
        let b: Vec<u64> = SeedSpec::new(7, 3).rng().random_iter().take(8).collect();
        assert_eq!(a, b);
        let c: Vec<u64> = SeedSpec::new(7, 4).rng().random_iter().take(8).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn replicas_differ() {
        let s = SeedSpec::new(1, 0);
        assert_ne!(s.replica(0), s.replica(1));
        assert_ne!(s.replica(0), SeedSpec::new(1, 1).replica(0));
        let x: u64 = s.replica(5).rng().random();
        let y: u64 = s.replica(5).rng().random();
        assert_eq!(x, y);
    }
}
