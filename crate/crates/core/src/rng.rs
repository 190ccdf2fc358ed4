//! Seeded random streams.
//!
//! Every stochastic step draws from a [`ChaCha8Rng`] derived from a master
//! seed, a [`Purpose`] and an index, so results only depend on those three
//! values and never on scheduling or call order elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Data,
    Noise,
    Init,
    Validation,
    Sweep,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Data => 0x6461_7461,
            Purpose::Noise => 0x6e6f_6973,
            Purpose::Init => 0x696e_6974,
            Purpose::Validation => 0x7661_6c69,
            Purpose::Sweep => 0x7377_6570,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root of the generator hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Derived 64-bit seed for `(purpose, index)`.
    pub fn seed(&self, purpose: Purpose, index: u64) -> u64 {
        splitmix64(splitmix64(self.master ^ purpose.tag()).wrapping_add(splitmix64(index)))
    }

    pub fn stream(&self, purpose: Purpose, index: u64) -> StreamRng {
        StreamRng::seed_from_u64(self.seed(purpose, index))
    }

    /// A child tree, e.g. one per sweep point.
    pub fn child(&self, purpose: Purpose, index: u64) -> SeedTree {
        SeedTree::new(self.seed(purpose, index))
    }
}
