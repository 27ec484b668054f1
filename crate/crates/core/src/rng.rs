//! Seed splitting.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from
//! `split(master, domain, index)`. The mixer is SplitMix64 applied to the
//! three words in sequence, so streams for distinct `(domain, index)`
//! pairs are independent for practical purposes and identical across
//! platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags used when deriving sub-streams.
pub mod domain {
    pub const SUBORDINATOR: u64 = 0x01;
    pub const MNTS: u64 = 0x02;
    pub const GARCH_START: u64 = 0x10;
    pub const ASSET_FIT: u64 = 0x11;
    pub const MARKET_CHAIN: u64 = 0x20;
    pub const ASSET_CHAIN: u64 = 0x21;
    pub const INNOVATION_POOL: u64 = 0x22;
    pub const VARIANCE_SHOCK: u64 = 0x23;
    pub const REBALANCE: u64 = 0x30;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a domain tag and an index.
pub fn split(master: u64, domain: u64, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ domain.rotate_left(17));
    splitmix64(b ^ index.rotate_left(41))
}

pub fn stream(master: u64, domain: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(split(master, domain, index))
}

pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
