//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and placed
//! on a ChaCha stream number that packs the purpose, replication, round and
//! direction indices. Streams for distinct keys never overlap, and a draw
//! depends only on its key, so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Stream = ChaCha8Rng;

const PURPOSE_BITS: u32 = 4;
const REPLICATION_BITS: u32 = 20;
const ROUND_BITS: u32 = 24;
const DIRECTION_BITS: u32 = 16;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    /// Synthetic samples drawn during retraining.
    Synthetic = 0,
    /// Real data `(X0, Y0)` of one replication.
    RealData = 1,
    /// Quantities fixed for a whole experiment (offset direction, shared design).
    Experiment = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub purpose: Purpose,
    pub replication: u64,
    pub round: u64,
    pub direction: u64,
}

impl StreamKey {
    pub fn synthetic(replication: u64, round: u64, direction: u64) -> Self {
        StreamKey {
            purpose: Purpose::Synthetic,
            replication,
            round,
            direction,
        }
    }

    pub fn real_data(replication: u64) -> Self {
        StreamKey {
            purpose: Purpose::RealData,
            replication,
            round: 0,
            direction: 0,
        }
    }

    /// Experiment-wide stream; `slot` separates independent uses.
    pub fn experiment(slot: u64) -> Self {
        StreamKey {
            purpose: Purpose::Experiment,
            replication: 0,
            round: 0,
            direction: slot,
        }
    }

    pub const MAX_REPLICATIONS: u64 = 1 << REPLICATION_BITS;
    pub const MAX_ROUNDS: u64 = 1 << ROUND_BITS;
    pub const MAX_DIRECTIONS: u64 = 1 << DIRECTION_BITS;

    fn packed(&self) -> Result<u64> {
        fn check(field: &'static str, value: u64, bits: u32) -> Result<u64> {
            let max = 1u64 << bits;
            if value >= max {
                return Err(Error::SeedSpaceExhausted { field, value, max });
            }
            Ok(value)
        }
        let replication = check("replication", self.replication, REPLICATION_BITS)?;
        let round = check("round", self.round, ROUND_BITS)?;
        let direction = check("direction", self.direction, DIRECTION_BITS)?;
        let purpose = self.purpose as u64;
        debug_assert!(purpose < 1 << PURPOSE_BITS);
        Ok((purpose << (REPLICATION_BITS + ROUND_BITS + DIRECTION_BITS))
            | (replication << (ROUND_BITS + DIRECTION_BITS))
            | (round << DIRECTION_BITS)
            | direction)
    }
}

/// The independent stream for `key` under `master_seed`.
pub fn derive_stream(master_seed: u64, key: StreamKey) -> Result<Stream> {
    let stream_id = key.packed()?;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    Ok(rng)
}

/// The streams one replication draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicationStreams {
    master_seed: u64,
    replication: u64,
}

impl ReplicationStreams {
    pub fn new(master_seed: u64, replication: u64) -> Result<Self> {
        // validate the index once, up front
        StreamKey::real_data(replication).packed()?;
        Ok(ReplicationStreams {
            master_seed,
            replication,
        })
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    pub fn real_data(&self) -> Result<Stream> {
        derive_stream(self.master_seed, StreamKey::real_data(self.replication))
    }

    /// Synthetic draws for `direction` in round `round`; 1-D runs use direction 0.
    pub fn synthetic(&self, round: usize, direction: usize) -> Result<Stream> {
        derive_stream(
            self.master_seed,
            StreamKey::synthetic(self.replication, round as u64, direction as u64),
        )
    }
}
