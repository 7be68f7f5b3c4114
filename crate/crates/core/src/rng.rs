//! Seeded randomness.
//!
//! Every random draw in a trial comes from a substream keyed by
//! `(seed, trial, agent, round)`. Substreams are independent of evaluation
//! order, so trials can run in parallel and agents can be visited in any
//! order without changing sampled types.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::model::{DemandType, TypeSpace};

/// Agent slot reserved for the auctioneer's tie-breaking draws.
pub const TIE_BREAK_STREAM: u64 = u64::MAX;

/// Source of per-(agent, round) substreams for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
    trial: u64,
}

impl Streams {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Generator for `agent` in `round`.
    pub fn substream(&self, agent: u64, round: u64) -> SplitMix64 {
        let key = [self.seed, self.trial, agent, round]
            .iter()
            .fold(0x6a09_e667_f3bc_c908_u64, |acc, &word| mix(acc ^ mix(word)));
        SplitMix64::seed_from_u64(key)
    }

    pub fn agent_round(&self, agent: usize, round: usize) -> SplitMix64 {
        self.substream(agent as u64, round as u64)
    }

    pub fn tie_break(&self, round: usize) -> SplitMix64 {
        self.substream(TIE_BREAK_STREAM, round as u64)
    }
}

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws a type index with probability `p_θ`.
pub fn sample_type_index<R: Rng + ?Sized>(type_space: &TypeSpace, rng: &mut R) -> usize {
    if type_space.len() == 1 {
        return 0;
    }
    type_space.index_for(rng.random::<f64>())
}

/// Draws a demand type with probability `p_θ`.
pub fn sample_type<R: Rng + ?Sized>(type_space: &TypeSpace, rng: &mut R) -> DemandType {
    *type_space.get(sample_type_index(type_space, rng))
}
