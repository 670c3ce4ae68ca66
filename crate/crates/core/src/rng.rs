//! Keyed random streams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream whose key is
//! `(global seed, domain, sample index, attempt index)` and whose stream id is
//! the index of the entity being sampled (input neuron, sub-area, trial). No
//! stream depends on scheduling or worker count, so replays are exact.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps streams of different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Init = 1,
    Train = 2,
    Calibrate = 3,
    Evaluate = 4,
    NeuronDeletion = 5,
    SynapseDeletion = 6,
    Intensity = 7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: Domain,
    pub sample: u64,
    pub attempt: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: Domain, sample: u64, attempt: u64) -> Self {
        Self {
            seed,
            domain,
            sample,
            attempt,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(self.domain as u64).to_le_bytes());
        key[16..24].copy_from_slice(&self.sample.to_le_bytes());
        key[24..32].copy_from_slice(&self.attempt.to_le_bytes());
        key
    }

    /// Independent generator for entity `stream` under this key.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key_bytes());
        rng.set_stream(stream);
        rng
    }
}
