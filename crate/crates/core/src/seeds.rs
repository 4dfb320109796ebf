//! Counter-based seed derivation.
//!
//! Every random stream is `derive_seed(master, stream, index)`: the master
//! seed, a fixed stream tag naming the consumer, and a counter (sample
//! number, step number, trial number). The mix is SplitMix64 applied to
//! the three words in sequence, so no global RNG state exists and any
//! sub-stream can be regenerated in isolation.

/// Stream tags used by the harness.
pub mod stream {
    pub const DATA_TRAIN: u64 = 1;
    pub const DATA_TEST: u64 = 2;
    pub const DATA_VALID: u64 = 3;
    pub const DATA_SOURCE: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const STEP_NOISE: u64 = 7;
    pub const BMA_SAMPLE: u64 = 8;
    pub const LANCZOS: u64 = 9;
    pub const ORDER: u64 = 10;
    pub const CORRUPT: u64 = 11;
    pub const SURFACE: u64 = 12;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}
