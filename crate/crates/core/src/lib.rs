//! Simulation core for verifier-filtered synthetic retraining.
//!
//! A generator repeatedly refits itself on its own synthetic output, but
//! only on the samples an external verifier accepts. This crate holds the
//! numerics behind that loop:
//!
//! * [`truncnorm`]: moments and sampling of the truncated standard normal,
//!   plus an independent quadrature oracle ([`quadrature`]).
//! * [`verifier`]: knowledge-ball and interval verifiers and the truncation
//!   bounds they induce on synthetic label noise.
//! * [`gaussian1d`]: one-dimensional mean estimation under filtering.
//! * [`linreg`]: linear-regression retraining on a spectral block design.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, experiment
//! drivers and the command line live in the `verisim` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;

pub mod error;
pub mod gaussian1d;
pub mod linreg;
pub mod quadrature;
pub mod schedule;
pub mod special;
pub mod stream;
pub mod truncnorm;
pub mod verifier;

pub use error::{Error, Result};
pub use schedule::{Schedule, ScheduleKind};
pub use stream::{derive_stream, ReplicationStreams, Stream, StreamKey};
pub use truncnorm::{Bounds, Moments};
pub use verifier::{Interval1D, KnowledgeBall, VerifierBias};

/// How synthetic samples are filtered before refitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FilterMode {
    /// Draw exactly `n` samples from the truncated law the verifier induces.
    #[default]
    Direct,
    /// Generate unfiltered samples and keep the first `n` the verifier accepts.
    Reject,
    /// No verifier; every generated sample is kept.
    None,
}

/// Attempts allowed per retained sample in [`FilterMode::Reject`].
pub const MAX_ATTEMPTS_PER_SAMPLE: u64 = 1_000_000;
