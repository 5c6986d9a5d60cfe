//! Seeded random streams.
//!
//! Every consumer of randomness asks for a stream keyed by `(seed, purpose,
//! index)`. The purpose tag selects a ChaCha key and the index selects one of
//! the 2^64 independent ChaCha streams under that key, so assignment, data
//! generation and Monte Carlo replication never share draws and a replicate's
//! draws do not depend on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes used inside the crate.
pub mod purpose {
    pub const ASSIGNMENT: &str = "assignment";
    pub const MARGIN_SIZES: &str = "margins/sizes";
    pub const MARGIN_PARTICIPANTS: &str = "margins/participants";
    pub const MARGIN_EVENTS: &str = "margins/events";
    pub const MARGIN_LAYOUT: &str = "margins/layout";
    pub const WORLD_CLUSTER: &str = "world/cluster";
    pub const MC_REPLICATE: &str = "mc/replicate";
    pub const MC_WORLD: &str = "mc/world";
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a; only needs to be stable, not cryptographic.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Returns the generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ tag_hash(purpose).rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when one seeded object spawns another
/// (for example a regenerated world per Monte Carlo replicate).
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut state = seed ^ tag_hash(purpose) ^ index.wrapping_mul(0xD605_BBB5_8C8A_BBD5);
    splitmix64(&mut state)
}
