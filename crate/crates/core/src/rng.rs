//! Counter-based random streams.
//!
//! Every simulation draws from a ChaCha8 stream keyed by the user seed, with
//! the 64-bit stream id derived by hashing `(seed, run, purpose)`. Streams never
//! depend on how many draws another stream made, so results are identical for
//! any thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Urn = 1,
    Source = 2,
    Instrument = 3,
    InstrumentCoupling = 4,
    Setting = 5,
    Dataset = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for `(seed, run_id, purpose)`.
pub fn stream_id(seed: u64, run_id: u64, purpose: Purpose) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ run_id) ^ purpose as u64)
}

pub fn stream(seed: u64, run_id: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(seed, run_id, purpose));
    rng
}
