//! Random number generation.
//!
//! Every stochastic draw in the crate goes through [`SimRng`], a ChaCha8
//! stream cipher generator. ChaCha is counter based: a `(seed, stream)`
//! pair identifies an independent sequence, so callers derive separate
//! streams for the environment, the policy and the learner from one user
//! seed without any shared state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids used by the crate. Distinct ids give independent sequences
/// for the same seed.
pub mod stream {
    pub const ENV: u64 = 0;
    pub const POLICY: u64 = 1;
    pub const LEARNER: u64 = 2;
    pub const EVAL_ENV: u64 = 3;
    pub const ORACLE: u64 = 4;
}

pub fn derive(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in (0, 1]; safe as a logarithm argument.
pub(crate) fn open_unit(rng: &mut SimRng) -> f64 {
    use rand::Rng;
    1.0 - rng.gen::<f64>()
}
