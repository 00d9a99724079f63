//! Per-round verified sample counts `n_k`.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `n_k = start`.
    Fixed,
    /// Evenly spaced from `start` to `end` (rounded), inclusive of both ends.
    Linear { end: u64 },
    /// `n_k = round(start * ratio^k)`, `ratio >= 1`.
    Geometric { ratio: f64 },
}

/// A non-decreasing sequence of `rounds` counts, each at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    start: u64,
    rounds: usize,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, start: u64, rounds: usize) -> Result<Self> {
        if start == 0 {
            return Err(Error::invalid("schedule.start", "must be at least 1"));
        }
        match kind {
            ScheduleKind::Fixed => {}
            ScheduleKind::Linear { end } => {
                if end < start {
                    return Err(Error::invalid("schedule.end", "must be at least start"));
                }
            }
            ScheduleKind::Geometric { ratio } => {
                if !(ratio >= 1.0) || !ratio.is_finite() {
                    return Err(Error::invalid("schedule.ratio", "must be finite and at least 1"));
                }
                let last = start as f64 * libm::pow(ratio, rounds.saturating_sub(1) as f64);
                if !(last < 9.0e15) {
                    return Err(Error::invalid("schedule.ratio", "counts overflow"));
                }
            }
        }
        Ok(Schedule { kind, start, rounds })
    }

    pub fn fixed(n: u64, rounds: usize) -> Result<Self> {
        Schedule::new(ScheduleKind::Fixed, n, rounds)
    }

    pub fn linear(start: u64, end: u64, rounds: usize) -> Result<Self> {
        Schedule::new(ScheduleKind::Linear { end }, start, rounds)
    }

    pub fn geometric(start: u64, ratio: f64, rounds: usize) -> Result<Self> {
        Schedule::new(ScheduleKind::Geometric { ratio }, start, rounds)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// `n_k` for `k < rounds`.
    pub fn count(&self, k: usize) -> Option<u64> {
        if k >= self.rounds {
            return None;
        }
        let n = match self.kind {
            ScheduleKind::Fixed => self.start,
            ScheduleKind::Linear { end } => {
                if self.rounds == 1 {
                    self.start
                } else {
                    let step = (end - self.start) as f64 / (self.rounds - 1) as f64;
                    libm::round(self.start as f64 + step * k as f64) as u64
                }
            }
            ScheduleKind::Geometric { ratio } => {
                libm::round(self.start as f64 * libm::pow(ratio, k as f64)) as u64
            }
        };
        Some(n.max(1))
    }

    pub fn counts(&self) -> Vec<u64> {
        (0..self.rounds).filter_map(|k| self.count(k)).collect()
    }
}
