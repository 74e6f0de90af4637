//! Seeded random streams. Every consumer owns its own stream; streams are
//! derived from a seed and a stream index so they never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Independent stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A stream for a labelled sub-task, e.g. `(round, slot)`.
pub fn substream(seed: u64, label: u64, a: u64, b: u64) -> Stream {
    // splitmix-style mixing keeps (label, a, b) triples apart
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= a.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    stream(z, b)
}

/// A 64-bit seed derived from `seed` and a label, for seeding other
/// generators.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    use rand::RngCore;
    substream(seed, label, 0, 0).next_u64()
}
