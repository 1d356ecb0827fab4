//! Reproducible randomness.
//!
//! Every node owns a private stream, and every Monte-Carlo trial owns a
//! private sub-source, all derived from one master seed. Derivation is a
//! splitmix64 chain with domain-separation tags, so streams for distinct
//! (trial, vertex) coordinates are independent reproducible sequences.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TAG_TRIAL: u64 = 0x9e37_79b9_7f4a_7c15;
const TAG_VERTEX: u64 = 0xbf58_476d_1ce4_e5b9;
const TAG_LOCAL: u64 = 0x94d0_49bb_1331_11eb;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ tag).wrapping_add(splitmix64(index.wrapping_add(tag))))
}

/// A point in the (seed, trial*, vertex*) derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomnessSource {
    seed: u64,
}

impl RandomnessSource {
    pub fn new(seed: u64) -> Self {
        RandomnessSource { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sub-source for trial `t`.
    pub fn trial(&self, t: u64) -> RandomnessSource {
        RandomnessSource {
            seed: derive(self.seed, TAG_TRIAL, t),
        }
    }

    /// The private stream of vertex `v`.
    pub fn vertex_rng(&self, v: u32) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive(self.seed, TAG_VERTEX, v as u64))
    }

    /// A stream for this source itself (orchestrator-level choices).
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive(self.seed, TAG_LOCAL, 0))
    }
}
