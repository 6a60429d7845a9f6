//! Reference counters used for comparison.
//!
//! * [`Morris`]: the classic one-dimensional counter with parameter `a`.
//! * [`DMorris`]: `d` independent Morris counters, one per coordinate.
//! * [`NaiveShared`]: a shared scale counter with every relative entry
//!   capped at `a_naive`. It is unbiased but its set of representable
//!   estimates is too sparse once `a_naive < sqrt(d) / 3`.

use crate::counter::{bits_for_states, halve_with_rounding, CounterError};
use crate::randomness::RandomSource;

/// Morris counter state: just the index `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Morris {
    a: f64,
    r: u64,
}

impl Morris {
    pub fn new(a: f64) -> Result<Self, CounterError> {
        if !(a >= 1.0 && a.is_finite()) {
            return Err(CounterError::InvalidParam(format!(
                "Morris parameter must be >= 1, got {a}"
            )));
        }
        Ok(Morris { a, r: 0 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn index(&self) -> u64 {
        self.r
    }

    /// Advances the index with probability `(1 + 1/a)^-r`. The probability
    /// is evaluated in double precision and compared against a uniform
    /// 64-bit word, so it is exact to within about `2^-53`.
    pub fn increment(&mut self, rng: &mut RandomSource) {
        if self.r == 0 {
            self.r = 1;
            return;
        }
        let log_p = -(self.r as f64) * (1.0 / self.a).ln_1p();
        let p = log_p.exp();
        let threshold = (p * 2f64.powi(64)) as u64;
        if rng.next_u64() < threshold {
            self.r += 1;
        }
    }

    /// `a((1 + 1/a)^r - 1)`.
    pub fn estimate(&self) -> f64 {
        self.a * ((self.r as f64) * (1.0 / self.a).ln_1p()).exp_m1()
    }
}

/// Smallest Morris parameter whose relative variance `1/(2a)` is at most
/// `sigma^2`.
pub fn morris_accuracy_for_sigma(sigma: f64) -> f64 {
    (1.0 / (2.0 * sigma * sigma)).ceil()
}

/// Bits of one Morris counter over a stream of length `2^log2_n`:
/// `ceil(log2 log2 n) + ceil(log2(1 + a))`.
pub fn morris_space_bits(log2_n: f64, a: f64) -> u64 {
    let index_bits = log2_n.max(1.0).log2().ceil() as u64;
    index_bits + (1.0 + a).log2().ceil() as u64
}

/// Bits of `d` independent Morris counters.
pub fn dmorris_space_bits(log2_n: f64, d: usize, a: f64) -> u64 {
    d as u64 * morris_space_bits(log2_n, a)
}

/// `d` independent Morris counters sharing one random source.
#[derive(Debug, Clone)]
pub struct DMorris {
    counters: Vec<Morris>,
    rng: RandomSource,
}

impl DMorris {
    pub fn new(d: usize, a: f64, seed: u64) -> Result<Self, CounterError> {
        if d < 1 {
            return Err(CounterError::InvalidParam("d must be at least 1".into()));
        }
        Ok(DMorris {
            counters: vec![Morris::new(a)?; d],
            rng: RandomSource::new(seed),
        })
    }

    pub fn counters(&self) -> &[Morris] {
        &self.counters
    }

    pub fn increment(&mut self, j: usize) -> Result<(), CounterError> {
        let d = self.counters.len();
        let counter = self
            .counters
            .get_mut(j)
            .ok_or(CounterError::BadCoordinate { j, d })?;
        counter.increment(&mut self.rng);
        Ok(())
    }

    pub fn query(&self) -> Vec<f64> {
        self.counters.iter().map(Morris::estimate).collect()
    }

    pub fn space_bits(&self, log2_n: f64) -> u64 {
        dmorris_space_bits(log2_n, self.counters.len(), self.counters[0].a)
    }
}

/// Shared scale counter with fixed-width entries in `[0, a_naive]`.
#[derive(Debug, Clone)]
pub struct NaiveShared {
    a_naive: u64,
    u: u64,
    v: Vec<u64>,
    rng: RandomSource,
}

impl NaiveShared {
    pub fn new(d: usize, a_naive: u64, seed: u64) -> Result<Self, CounterError> {
        if d < 1 || a_naive < 1 {
            return Err(CounterError::InvalidParam(
                "naive counter needs d >= 1 and a_naive >= 1".into(),
            ));
        }
        Ok(NaiveShared {
            a_naive,
            u: 0,
            v: vec![0; d],
            rng: RandomSource::new(seed),
        })
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn v(&self) -> &[u64] {
        &self.v
    }

    pub fn a_naive(&self) -> u64 {
        self.a_naive
    }

    pub fn increment(&mut self, j: usize) -> Result<(), CounterError> {
        let d = self.v.len();
        if j >= d {
            return Err(CounterError::BadCoordinate { j, d });
        }
        if self.rng.bernoulli_pow2(self.u) {
            self.v[j] += 1;
            if self.v[j] > self.a_naive {
                self.u += 1;
                halve_with_rounding(&mut self.v, &mut self.rng);
            }
        }
        Ok(())
    }

    pub fn query(&self) -> Vec<f64> {
        let scale = (self.u as f64).exp2();
        self.v.iter().map(|&v| v as f64 * scale).collect()
    }

    /// `d * ceil(log2(1 + a_naive))` for the entries plus the scale counter
    /// for a stream of length `2^log2_n`.
    pub fn space_bits(&self, log2_n: f64) -> u64 {
        let entry = bits_for_states(self.a_naive + 1);
        let scale = log2_n.max(1.0).log2().ceil() as u64;
        self.v.len() as u64 * entry + scale
    }
}
