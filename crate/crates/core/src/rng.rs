//! Deterministic random streams.
//!
//! Every random quantity is drawn from ChaCha20 keyed by the run seed, with a
//! separate stream per purpose. Streams are selected by name (FNV-1a hash of
//! the label), so adding a new consumer never shifts the numbers another
//! consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Generator for `(seed, label)`.
pub fn stream(seed: u64, label: &str) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}
