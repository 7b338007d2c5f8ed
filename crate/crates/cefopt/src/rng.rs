//! Deterministic random streams.
//!
//! Every run owns one master seed. Independent sub-streams are derived per
//! purpose and per worker so that, e.g., function-value noise and subgradient
//! sampling never share state, and workers draw independently (the stochastic
//! model requires independent evaluations across workers and calls).
//! Randomness is always injected explicitly; nothing reads global state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. The numeric tag is stable: changing it changes every
/// seeded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Server-side stream: shared Rand-K round masks and downlink compressor
    /// randomness.
    Server,
    /// Per-worker uplink compressor randomness (non-shared Rand-K).
    WorkerCompressor,
    /// Per-worker function-evaluation noise.
    WorkerFnNoise,
    /// Per-worker subgradient mini-batch sampling / noise.
    WorkerSubgrad,
    /// Problem generation.
    Generator,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Server => 0,
            StreamKind::WorkerCompressor => 1,
            StreamKind::WorkerFnNoise => 2,
            StreamKind::WorkerSubgrad => 3,
            StreamKind::Generator => 4,
        }
    }
}

/// A ChaCha stream for `(seed, kind, index)`. `index` is the worker id for
/// per-worker kinds and 0 otherwise.
pub fn stream(seed: u64, kind: StreamKind, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind.tag() << 32) | index);
    rng
}
