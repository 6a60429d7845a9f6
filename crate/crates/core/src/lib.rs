//! Approximate counting of `d`-dimensional count vectors with Euclidean
//! relative error.
//!
//! The main data structure is [`counter::VecCounter`]: one shared scale
//! counter plus a relative vector stored under a symbol budget with the
//! ternary code in [`varint`]. It returns an unbiased estimate `x_hat` of
//! the count vector `x` with `E|x_hat - x|^2 <= sigma^2 |x|^2` while using
//! `log2 log2 n + O(d log2(1/sigma))` bits.
//!
//! Alongside it:
//!
//! * [`baselines`]: Morris counters, `d` independent Morris counters, and a
//!   fixed-width shared-scale counter that fails for large `d`.
//! * [`analysis`]: multiplicative covering checks and the state-space lower
//!   bounds.
//! * [`harness`]: seeded Monte Carlo trials and stream generation.
//! * [`trace`]: step-by-step state traces of a small counter.

pub mod analysis;
pub mod baselines;
pub mod counter;
pub mod harness;
pub mod randomness;
pub mod trace;
pub mod varint;

pub use counter::{CounterConfig, CounterError, SpaceBits, Trigger, VecCounter};
pub use randomness::RandomSource;
