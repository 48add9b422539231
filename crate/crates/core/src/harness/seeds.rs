//! Counter-based seed derivation.
//!
//! A stream seed is obtained by absorbing the master seed and a list of
//! integer tags into a SplitMix64 state, one finalizer round per word:
//!
//! ```text
//! h = mix(master ^ GOLDEN)
//! for t in tags: h = mix(h ^ t.wrapping_add(GOLDEN))
//! ```
//!
//! Every (cell, run) pair therefore gets a seed that depends only on its own
//! coordinates, never on scheduling order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(master ^ GOLDEN), |h, &t| mix(h ^ t.wrapping_add(GOLDEN)))
}

/// Stream tags.
pub const PILOT_DATA: u64 = 1;
pub const PILOT_FIT: u64 = 2;
pub const RUN: u64 = 3;
pub const RUN_FIT: u64 = 4;
pub const SWEEP: u64 = 5;
pub const GENERATE: u64 = 6;
pub const TERMINALS: u64 = 7;
