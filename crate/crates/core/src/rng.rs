//! Seed splitting. Every random stream is `ChaCha8(seed)` on stream id
//! `stream`, so independent consumers never share draws and a run is fully
//! determined by one `u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used inside the crate.
pub mod streams {
    pub const PUMP_PHASE: u64 = 1;
    pub const FRAME_NOISE: u64 = 2;
    pub const SHOT_NOISE: u64 = 3;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
