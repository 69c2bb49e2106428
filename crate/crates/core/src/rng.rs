//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(master seed, replica index, purpose)`. ChaCha is counter based, so a
//! stream depends only on its key, never on which thread asked for it or in
//! what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    WSample,
    Initial,
    Dynamics,
    Property,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::WSample => 0x5753_414d,
            Purpose::Initial => 0x494e_4954,
            Purpose::Dynamics => 0x4459_4e41,
            Purpose::Property => 0x5052_4f50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64, purpose: Purpose) -> Self {
        StreamKey {
            seed,
            replica,
            purpose,
        }
    }

    /// Derive a child key, e.g. one per grid size inside an experiment.
    pub fn split(self, index: u64) -> Self {
        StreamKey {
            seed: mix(self.seed ^ mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))),
            ..self
        }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut state = self.seed ^ self.purpose.tag().rotate_left(32);
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
            state = mix(state.wrapping_add(self.replica.wrapping_mul(0xd134_2543_de82_ef95)) ^ i as u64);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.replica);
        rng
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, replica: u64, purpose: Purpose) -> ChaCha8Rng {
    StreamKey::new(seed, replica, purpose).rng()
}

/// Seed of an independent sub-experiment `index` under master seed `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    StreamKey::new(seed, 0, Purpose::Dynamics).split(index).seed
}
