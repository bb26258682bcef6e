//! Counter-based random substreams.
//!
//! Every random draw in the simulator comes from a [`ChaCha8Rng`] keyed by
//! the master seed and a domain tag, with the stream id set to the index of
//! the work item (example, frame, trial). Results therefore depend only on
//! `(seed, domain, index)` and never on how work is split across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Domain tags that keep unrelated consumers of the master seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    TrainSet = 1,
    TestSet = 2,
    ModelInit = 3,
    Shuffle = 4,
    Frames = 5,
    Fading = 6,
    Scratch = 7,
    Captures = 8,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed for `domain` from `seed`; pass it to [`stream`].
pub fn derive(seed: u64, domain: Domain) -> u64 {
    mix(seed ^ mix(domain as u64))
}

/// Independent generator for work item `index` under `key`.
pub fn stream(key: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Shorthand for `stream(derive(seed, domain), index)`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    stream(derive(seed, domain), index)
}
