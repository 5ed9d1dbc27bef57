//! The per-episode random stream.
//!
//! One ChaCha8 stream per battle, drawn strictly in action-resolution order.
//! The generator state is part of the serialized battle state, so a state
//! snapshot carries its exact stream position.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// SplitMix64 finalizer; used to derive stream seeds from (task, episode) pairs.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(base: u64, seed: u64) -> u64 {
    mix64(base ^ mix64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineRng {
    rng: ChaCha8Rng,
    draws: u64,
}

impl EngineRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// Uniform draw in [0, 1).
    pub fn unit(&mut self) -> f64 {
        self.draws += 1;
        self.rng.gen::<f64>()
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}
