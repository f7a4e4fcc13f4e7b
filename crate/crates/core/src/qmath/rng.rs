//! Seeded random streams.
//!
//! Every random draw in the crate goes through a `ChaCha20Rng` obtained from
//! [`stream_rng`]. The stream-splitting rule is: the 64-bit user seed selects
//! the ChaCha key, and an independent 64-bit stream id selects the ChaCha
//! stream. Parallel workers derive the stream id from the trial or run index,
//! so results do not depend on scheduling or on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Well-separated stream ids for nested loops (`outer` in the high 32 bits).
pub fn substream(outer: u64, inner: u64) -> u64 {
    (outer << 32) ^ (inner & 0xffff_ffff)
}
