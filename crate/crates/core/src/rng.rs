//! Seeded substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the master
//! seed, with the stream id built from a purpose tag and an index (draw or
//! replication number). Work split across threads therefore sees the same
//! numbers as a sequential run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    GaussianDraw = 1,
    Replication = 2,
    Sample = 3,
}

pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}

/// Seed for replication `rep`, derived from the master seed.
pub fn child_seed(seed: u64, rep: u64) -> u64 {
    use rand::RngCore;
    substream(seed, Purpose::Replication, rep).next_u64()
}
