//! Deterministic seed splitting.
//!
//! Every derived generator is a ChaCha8 instance keyed by the parent seed
//! with the child index as its stream id, so children never overlap and any
//! single child can be regenerated in isolation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for child `index` of `seed`.
pub fn child_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A 64-bit sub-seed for child `index` of `seed`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    child_rng(seed, index).next_u64()
}

/// Sub-seed for a labelled purpose (environment draws, replicas, bootstrap)
/// so that different consumers of one global seed do not collide.
pub fn tagged_seed(seed: u64, tag: u64, index: u64) -> u64 {
    sub_seed(sub_seed(seed, tag), index)
}

pub const TAG_ENVIRONMENT: u64 = 0x656e_7669;
pub const TAG_REPLICA: u64 = 0x7265_706c;
pub const TAG_BOOTSTRAP: u64 = 0x626f_6f74;
