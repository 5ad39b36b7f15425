//! Named, counter-addressed random substreams.
//!
//! Every random draw in the toolkit comes from a ChaCha stream keyed by the
//! master seed and a substream name, with the ChaCha stream id set to the
//! item index. Trial `i` therefore sees the same numbers however the trials
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream names.
pub mod stream {
    pub const TRIAL: &str = "trial";
    pub const NOISE: &str = "noise";
    pub const DRIFT: &str = "drift";
    pub const SWEEP: &str = "sweep";
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn name_key(name: &str) -> u64 {
    // FNV-1a; stable across platforms and releases
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Derives a child seed, e.g. one per data set, from a parent seed.
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    mix(mix(seed ^ name_key(name)) ^ mix(index.wrapping_add(0x5151)))
}

/// The generator for item `index` of substream `name`.
pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ name_key(name)));
    rng.set_stream(index);
    rng
}
