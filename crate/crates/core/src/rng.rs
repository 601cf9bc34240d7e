//! Seed derivation for independent per-frame random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream whose seed is
//! derived from `(master seed, frame id, purpose)` with a SplitMix64 mixer,
//! so frames can be simulated in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep the streams of one frame independent of each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    QuantumSymbols = 1,
    QpskFiller = 2,
    DetectionNoise = 3,
    ExcessNoise = 4,
    PhaseNoise = 5,
    Calibration = 6,
    Corruption = 7,
    Channel = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, frame_id: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ frame_id) ^ stream as u64)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn frame_rng(master: u64, frame_id: u64, stream: Stream) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, frame_id, stream))
}
