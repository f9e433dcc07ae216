//! Online signature verification toolkit.
//!
//! A weight-shared Siamese LSTM verifier trained on pairs of signatures, a
//! dynamic-time-warping baseline with floating feature selection, and the
//! 1vs1 / 4vs1 equal-error-rate evaluation protocol, together with SVC file
//! handling and a synthetic corpus generator for desk-scale runs.

pub mod dataset;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod features;
pub mod lstm;
pub mod model_io;
pub mod pipeline;
pub mod sffs;
pub mod siamese;
pub mod signature;
pub mod synth;
pub mod train;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for one named random stream under `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
