//! Reproducible random streams split from one root seed.
//!
//! Every consumer gets its own ChaCha stream keyed by the root seed and a
//! `(purpose, a, b)` counter, so draws do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Distinct consumers of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    TimeSample = 1,
    NonEdgeSample = 2,
    Simulation = 3,
    Bands = 4,
    Edges = 5,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root seed plus stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        SeedTree { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Independent generator for `(purpose, a, b)`.
    pub fn stream(&self, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
        let key = splitmix(self.root ^ splitmix(purpose as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(splitmix(a.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ splitmix(b)));
        rng
    }
}
