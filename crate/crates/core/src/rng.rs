//! Named, versioned random streams. A run is identified by `(seed, stream)`
//! so independent runs can be replayed one by one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RNG_NAME: &str = "chacha8/v1";

pub type Rng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
