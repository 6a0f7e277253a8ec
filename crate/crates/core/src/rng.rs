//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit seed and a stream id. ChaCha is a counter-based cipher, so the
//! output is identical on every platform, and distinct stream ids give
//! independent sequences without any sequential dependence between them.
//! Changing `max_iters` therefore never perturbs earlier iterations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type GmmRng = ChaCha8Rng;

/// What a stream is used for. Each purpose maps to a disjoint stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initialization of a trial (centers, partitions, latent values).
    Init,
    /// Bound selection at engine iteration `t >= 1`.
    Iteration(usize),
    /// The fold partition of the multi-fold selector.
    Folds,
    /// Dataset generation.
    Data,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 0,
            Stream::Iteration(t) => t as u64,
            Stream::Folds => 1 << 62,
            Stream::Data => 1 << 63,
        }
    }
}

pub fn stream(seed: u64, which: Stream) -> GmmRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.id());
    rng
}
