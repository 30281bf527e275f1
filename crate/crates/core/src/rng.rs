//! Seeded random streams.
//!
//! Every random consumer gets a ChaCha8 generator keyed by the run seed and
//! a stream number. Independent chains (PCD chains, AIS runs) use their index
//! as the stream, so their draws do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream reserved for parameter initialization.
pub const INIT_STREAM: u64 = 1 << 40;
/// Stream reserved for data generation.
pub const DATA_STREAM: u64 = 1 << 41;
/// Stream reserved for mini-batch shuffling.
pub const SHUFFLE_STREAM: u64 = 1 << 42;
/// Persistent chain `k` uses stream `CHAIN_STREAM + k`.
pub const CHAIN_STREAM: u64 = 1 << 39;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
