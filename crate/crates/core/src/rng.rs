//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit master seed. Independent consumers select disjoint streams of that
//! key by a numeric tag, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Algorithm and crate version recorded alongside every seeded output.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64 + set_stream)";

/// Stream tags. Values are part of the reproducibility contract; do not renumber.
pub mod streams {
    pub const POPULATION: u64 = 0x504f_5055_0000_0000;
    pub const OUTAGE: u64 = 0x4f55_5441_0000_0000;
    pub const DECODING: u64 = 0x4445_434f_0000_0000;
    pub const ORACLE: u64 = 0x4f52_4143_0000_0000;
}

/// Generator for `seed` positioned on stream `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
