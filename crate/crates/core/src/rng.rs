//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream (`rand_chacha::ChaCha8Rng`)
//! seeded with a 64-bit value. Child seeds are derived from a parent seed with
//! [`derive_seed`], a SplitMix64 finalizer applied to `(parent, stream, index)`.
//! Derivation depends only on its arguments, so adding replications or retailers
//! never perturbs the seeds of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Algorithm identity recorded in report provenance.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng seeded via seed_from_u64; child seeds by SplitMix64(parent, stream, index)";

/// Stream tags for [`derive_seed`].
pub mod stream {
    pub const REPLICATION: u64 = 0x5245_504c; // "REPL"
    pub const DEMAND: u64 = 0x4445_4d44; // "DEMD"
    pub const SCHEDULE: u64 = 0x5343_4844; // "SCHD"
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the `index`-th member of `stream` under `parent`.
pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(parent);
    let b = splitmix64(a ^ stream);
    splitmix64(b ^ index.wrapping_mul(GOLDEN_GAMMA))
}

pub fn stream_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
