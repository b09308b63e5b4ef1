//! Stateless derivation of named random streams from a master seed.
//!
//! Every replication, instance draw, and per-job service stream gets its own
//! generator derived from `(master, tags...)`, so results are reproducible
//! across platforms and independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of tags into a stream seed.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix(master);
    for &tag in tags {
        h = splitmix(h ^ splitmix(tag));
    }
    h
}

/// A seedable, portable generator for the stream named by `tags`.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tags))
}
