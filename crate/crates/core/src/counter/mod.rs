//! The shared-scale vector counter.
//!
//! State is a scale counter `U` and a relative vector `V`; the estimate is
//! `2^U * V`. An increment of coordinate `j` bumps `V_j` with probability
//! `2^-U`. Whenever the ternary code length `psi(V)` exceeds the budget
//! `M*`, the counter scales up: `U += 1` and every entry of `V` is halved,
//! odd entries rounding up or down on a fair coin so the estimate stays
//! unbiased.
//!
//! Streams no longer than `1 / sigma` are counted exactly instead.

mod config;
mod state_file;

pub use config::{
    accuracy_for_sigma, scale_cap_log2n, symbol_budget, CounterConfig, SpaceBits, Trigger,
};
pub(crate) use config::{bits_for_states, check_sigma};

use thiserror::Error;

use crate::randomness::RandomSource;
use crate::varint::{psi, psi_vec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("coordinate {j} out of range for dimension {d}")]
    BadCoordinate { j: usize, d: usize },
    #[error("stream exceeds the configured maximum length {n}")]
    StreamOverflow { n: u64 },
    #[error("corrupt counter state: {0}")]
    CorruptState(String),
    #[error("relative vector entry overflowed")]
    Overflow,
}

/// Live state of a counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterState {
    pub(crate) u: u64,
    pub(crate) v: Vec<u64>,
    pub(crate) failed: bool,
    pub(crate) exact: Option<Vec<u64>>,
}

impl CounterState {
    fn fresh(config: &CounterConfig) -> Self {
        CounterState {
            u: 0,
            v: vec![0; config.d],
            failed: false,
            exact: config.deterministic_mode.then(|| vec![0; config.d]),
        }
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn v(&self) -> &[u64] {
        &self.v
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn exact(&self) -> Option<&[u64]> {
        self.exact.as_deref()
    }
}

/// What a single increment did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IncrementOutcome {
    /// `V_j` was bumped (or the exact count, in deterministic mode).
    pub accepted: bool,
    pub scaled_up: bool,
    /// This increment pushed the counter into the fail state.
    pub entered_fail: bool,
}

/// Halves every entry in place, rounding odd entries up or down with a
/// fresh fair sign each. Signs are drawn in coordinate order, odd entries
/// only.
pub fn halve_with_rounding(v: &mut [u64], rng: &mut RandomSource) {
    for entry in v.iter_mut() {
        if *entry & 1 == 0 {
            *entry /= 2;
        } else if rng.rademacher() > 0 {
            *entry = *entry / 2 + 1;
        } else {
            *entry /= 2;
        }
    }
}

#[derive(Debug, Clone)]
pub struct VecCounter {
    config: CounterConfig,
    state: CounterState,
    rng: RandomSource,
    increments: u64,
    psi_total: u64,
}

impl VecCounter {
    pub fn new(config: CounterConfig, seed: u64) -> Self {
        let state = CounterState::fresh(&config);
        let psi_total = psi_vec(&state.v);
        VecCounter {
            config,
            state,
            rng: RandomSource::new(seed),
            increments: 0,
            psi_total,
        }
    }

    /// Convenience constructor with the default parameterization.
    pub fn with_params(n: u64, d: usize, sigma: f64, seed: u64) -> Result<Self, CounterError> {
        Ok(VecCounter::new(CounterConfig::new(n, d, sigma)?, seed))
    }

    pub fn config(&self) -> &CounterConfig {
        &self.config
    }

    pub fn state(&self) -> &CounterState {
        &self.state
    }

    pub fn increments(&self) -> u64 {
        self.increments
    }

    /// Current code length `psi(V)`.
    pub fn psi(&self) -> u64 {
        self.psi_total
    }

    pub fn rng(&self) -> &RandomSource {
        &self.rng
    }

    /// Records one occurrence of coordinate `j` (0-based).
    pub fn increment(&mut self, j: usize) -> Result<IncrementOutcome, CounterError> {
        let d = self.config.d;
        if j >= d {
            return Err(CounterError::BadCoordinate { j, d });
        }
        if self.increments >= self.config.n {
            return Err(CounterError::StreamOverflow { n: self.config.n });
        }
        self.increments += 1;

        if let Some(exact) = self.state.exact.as_mut() {
            exact[j] += 1;
            return Ok(IncrementOutcome {
                accepted: true,
                ..Default::default()
            });
        }
        if self.state.failed {
            return Ok(IncrementOutcome::default());
        }

        let mut outcome = IncrementOutcome::default();
        if self.rng.bernoulli_pow2(self.state.u) {
            let old = self.state.v[j];
            let new = old.checked_add(1).ok_or(CounterError::Overflow)?;
            self.state.v[j] = new;
            self.psi_total = self.psi_total - psi(old) + psi(new);
            outcome.accepted = true;
        }
        if self
            .config
            .trigger
            .fires(self.psi_total, self.config.m_star)
        {
            outcome.scaled_up = true;
            outcome.entered_fail = self.scale_up();
            debug_assert!(
                self.state.failed
                    || !self
                        .config
                        .trigger
                        .fires(self.psi_total, self.config.m_star),
                "a single scale-up must restore the budget"
            );
        }
        debug_assert!(self.psi_total <= self.config.m_star);
        Ok(outcome)
    }

    /// Returns true when the counter entered the fail state instead.
    fn scale_up(&mut self) -> bool {
        if self.state.u + 1 >= self.config.u_star {
            self.state.failed = true;
            self.state.u = self.config.u_star;
            self.state.v.iter_mut().for_each(|e| *e = 0);
            self.psi_total = psi_vec(&self.state.v);
            return true;
        }
        self.state.u += 1;
        halve_with_rounding(&mut self.state.v, &mut self.rng);
        self.psi_total = psi_vec(&self.state.v);
        false
    }

    /// Feeds every coordinate of `stream` in order.
    pub fn extend<I: IntoIterator<Item = usize>>(&mut self, stream: I) -> Result<(), CounterError> {
        for j in stream {
            self.increment(j)?;
        }
        Ok(())
    }

    /// The estimate `2^U * V` (exact counts in deterministic mode, zeros
    /// once failed).
    pub fn query(&self) -> Vec<f64> {
        if let Some(exact) = &self.state.exact {
            return exact.iter().map(|&x| x as f64).collect();
        }
        if self.state.failed {
            return vec![0.0; self.config.d];
        }
        let scale = (self.state.u as f64).exp2();
        self.state.v.iter().map(|&v| v as f64 * scale).collect()
    }

    pub fn space_bits(&self) -> SpaceBits {
        self.config.space_bits()
    }
}
