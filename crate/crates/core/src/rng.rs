//! Seeded ChaCha20 streams. Each consumer gets its own stream id derived from
//! a component tag and a sub-index, so adding draws in one component never
//! shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use rand_chacha::ChaCha20Rng as Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    MdpGen = 1,
    Injector = 2,
    Trajectory = 3,
    Td = 4,
    Sampling = 5,
}

/// Generator for `(seed, component, sub)`; `sub` distinguishes e.g. the
/// iteration index within one run.
pub fn stream(seed: u64, component: Component, sub: u32) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((component as u64) << 32) | u64::from(sub));
    rng
}
