//! Reproducible random streams.
//!
//! Every random draw in the crate comes from ChaCha20 (a counter-based
//! stream cipher generator, `rand_chacha::ChaCha20Rng`). A stream is keyed by
//! the global seed and selected by a 64-bit stream id built from a purpose tag
//! and up to two indices, so results never depend on the order in which
//! parallel workers request their streams.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Purpose tags, one per independent consumer of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Prior = 1,
    Truth = 2,
    ObservationNoise = 3,
    EkiPerturbation = 4,
    KMeans = 5,
    Classifier = 6,
    Shuffle = 7,
    Training = 8,
}

pub fn stream(seed: u64, tag: Stream, a: u64, b: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // 8 bits of tag, 32 bits of `a`, 24 bits of `b`.
    let id = ((tag as u64) << 56) | ((a & 0xffff_ffff) << 24) | (b & 0x00ff_ffff);
    rng.set_stream(id);
    rng
}
