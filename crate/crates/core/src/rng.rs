//! Seeded random streams.
//!
//! Each replication owns one generator seed. Arrival times, arrival
//! locations and travel distances draw from separate ChaCha streams of that
//! seed so the three processes stay independent and a change in how one of
//! them is consumed never shifts the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ARRIVAL_STREAM: u64 = 0;
const LOCATION_STREAM: u64 = 1;
const DISTANCE_STREAM: u64 = 2;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for replication `rep` of an experiment seeded with `seed`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Streams {
    pub arrivals: Rng,
    pub locations: Rng,
    pub distances: Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams {
            arrivals: stream(seed, ARRIVAL_STREAM),
            locations: stream(seed, LOCATION_STREAM),
            distances: stream(seed, DISTANCE_STREAM),
        }
    }
}
