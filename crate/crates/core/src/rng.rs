//! Named random streams derived from one master seed.
//!
//! Every consumer (probes, masks, folds, noise, ...) asks for its own stream
//! by name, so adding a new consumer never shifts the draws of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of the stream `name` under `master`.
pub fn substream_seed(master: u64, name: &str) -> u64 {
    splitmix64(splitmix64(master) ^ fnv1a(name))
}

/// Seed of the `index`-th member of the stream family `name`.
pub fn indexed_seed(master: u64, name: &str, index: u64) -> u64 {
    splitmix64(substream_seed(master, name) ^ splitmix64(index.wrapping_add(1)))
}

pub fn stream(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, name))
}

pub fn indexed_stream(master: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(indexed_seed(master, name, index))
}
