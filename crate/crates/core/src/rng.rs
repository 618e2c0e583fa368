//! Named, independently seedable random streams.
//!
//! Every subsystem draws from its own ChaCha stream. The stream number is a
//! stable hash of the subsystem name, so re-seeding one subsystem never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const PLACEMENT: &str = "placement";
pub const GRASP: &str = "grasp";
pub const SENSORS: &str = "sensors";
pub const PERCEPTION: &str = "perception";

/// 64-bit FNV-1a.
pub fn stream_id(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn named_stream(seed: u64, name: &str) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}

/// The world-side streams. Perception owns its stream separately so that it
/// can borrow the world immutably while sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Streams {
    pub placement: SimRng,
    pub grasp: SimRng,
    pub sensors: SimRng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self {
            placement: named_stream(seed, PLACEMENT),
            grasp: named_stream(seed, GRASP),
            sensors: named_stream(seed, SENSORS),
        }
    }

    /// Re-seeds a single stream. Returns `false` for unknown names.
    pub fn reseed(&mut self, name: &str, seed: u64) -> bool {
        let slot = match name {
            PLACEMENT => &mut self.placement,
            GRASP => &mut self.grasp,
            SENSORS => &mut self.sensors,
            _ => return false,
        };
        *slot = named_stream(seed, name);
        true
    }
}
