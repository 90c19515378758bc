//! Deterministic random substreams. Every stochastic component draws from a
//! ChaCha8 generator keyed by (master seed, stream label, item index), so
//! results are independent of scheduling and worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels; keep values stable, they are part of reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Ensemble = 1,
    Lyapunov = 2,
    Bootstrap = 3,
    LocalCumulants = 4,
}

/// Generator for item `index` of the labeled stream under `seed`.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
