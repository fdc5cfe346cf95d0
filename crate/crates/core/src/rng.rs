//! Deterministic random stream derivation.
//!
//! Every unit of parallel work (a sample slot, a replication, a particle)
//! owns a stream derived from the master seed and its position in the
//! work tree, so results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all simulation work.
pub type StreamRng = ChaCha8Rng;

/// A node in the seed tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Seed {
    pub fn new(master: u64) -> Self {
        Seed(master)
    }

    /// Derive the seed of child `index`.
    pub fn child(self, index: u64) -> Seed {
        Seed(splitmix64(splitmix64(self.0 ^ 0x243F_6A88_85A3_08D3) ^ index))
    }

    /// Derive a named child, for streams that are not indexed.
    pub fn named(self, label: &str) -> Seed {
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01B3);
        }
        self.child(h)
    }

    pub fn rng(self) -> StreamRng {
        StreamRng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
