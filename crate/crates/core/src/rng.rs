//! Seeded random streams. Every subsystem draws from its own stream, derived
//! from the run seed, a fixed label and an index, so results do not depend on
//! scheduling or on how many draws another subsystem made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, label, index)`.
pub fn fork(seed: u64, label: &str, index: u64) -> Stream {
    let mut h = splitmix(seed);
    for b in label.bytes() {
        h = splitmix(h ^ b as u64);
    }
    h = splitmix(h ^ index);
    ChaCha8Rng::seed_from_u64(h)
}
