//! Counter-based random substreams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream selected by
//! `(purpose, a, b)` under the master seed, so results do not depend on how
//! work is scheduled across threads.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Indices must stay below this bound to keep stream ids distinct.
pub const MAX_INDEX: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Device drop for network realization `a`.
    Devices = 1,
    /// NLoS fading for network `a`, channel draw `b`.
    Fading = 2,
    /// CSI error for network `a`, channel draw `b`.
    CsiError = 3,
    /// Device pair `a` of a correlation estimate.
    CorrelationPair = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(purpose: Purpose, a: u64, b: u64) -> u64 {
        debug_assert!(a < MAX_INDEX && b < MAX_INDEX);
        ((purpose as u64) << 60) | (a << 30) | b
    }

    pub fn rng(&self, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(Self::stream_id(purpose, a, b));
        rng
    }
}

/// Reject counts that would overflow the stream index space.
pub fn check_index_range(what: &str, count: u64) -> Result<()> {
    if count == 0 {
        return Err(Error::Config(format!("{what} must be at least 1")));
    }
    if count > MAX_INDEX {
        return Err(Error::Config(format!("{what} must not exceed {MAX_INDEX}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let s = Streams::new(42);
        let a: u64 = s.rng(Purpose::Fading, 3, 7).random();
        let b: u64 = s.rng(Purpose::Fading, 3, 7).random();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_keys_distinct_streams() {
        let s = Streams::new(42);
        let a: u64 = s.rng(Purpose::Fading, 3, 7).random();
        let b: u64 = s.rng(Purpose::Fading, 7, 3).random();
        let c: u64 = s.rng(Purpose::CsiError, 3, 7).random();
        let d: u64 = Streams::new(43).rng(Purpose::Fading, 3, 7).random();
        assert!(a != b && a != c && a != d);
    }

    #[test]
    fn index_limits() {
        assert!(check_index_range("n", 0).is_err());
        assert!(check_index_range("n", MAX_INDEX).is_ok());
        assert!(check_index_range("n", MAX_INDEX + 1).is_err());
    }
}
