//! Seeded, splittable random streams.
//!
//! Every experiment derives its generators from a single 64-bit seed. Independent
//! trials get independent ChaCha streams so results do not depend on how trials
//! are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// The generator for stream `index` of the run seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
