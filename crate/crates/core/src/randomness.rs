//! Seedable bit source for the counter's coin flips.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. Its output stream is value-stable across
//! releases, so a seed fully determines every trace and experiment.
//!
//! Randomness is handed out one bit at a time from a 64-bit buffer. This
//! lets [`RandomSource::bernoulli_pow2`] draw an event of probability
//! exactly `2^-u` by reading bits until the first zero, for any `u`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
    buffer: u64,
    buffered: u32,
    bits_consumed: u64,
}

/// Everything needed to resume a [`RandomSource`] bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSnapshot {
    pub seed: u64,
    pub chacha_seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
    pub buffer: u64,
    pub buffered: u32,
    pub bits_consumed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buffer: 0,
            buffered: 0,
            bits_consumed: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of fair bits handed out so far (not counting whole words drawn
    /// through [`RandomSource::next_u64`]).
    pub fn bits_consumed(&self) -> u64 {
        self.bits_consumed
    }

    #[inline]
    pub fn bit(&mut self) -> bool {
        if self.buffered == 0 {
            self.buffer = self.rng.next_u64();
            self.buffered = 64;
        }
        let b = self.buffer & 1 == 1;
        self.buffer >>= 1;
        self.buffered -= 1;
        self.bits_consumed += 1;
        b
    }

    /// Returns true with probability exactly `2^-u`. Reads fair bits until
    /// the first zero (false) or until `u` ones in a row (true), so it uses
    /// at most `u` bits and fewer than two on average.
    #[inline]
    pub fn bernoulli_pow2(&mut self, u: u64) -> bool {
        for _ in 0..u {
            if !self.bit() {
                return false;
            }
        }
        true
    }

    /// Uniform sign in `{-1, +1}`.
    #[inline]
    pub fn rademacher(&mut self) -> i8 {
        if self.bit() {
            1
        } else {
            -1
        }
    }

    /// A full 64-bit uniform word, taken directly from the generator.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn snapshot(&self) -> RandomSnapshot {
        RandomSnapshot {
            seed: self.seed,
            chacha_seed: self.rng.get_seed(),
            stream: self.rng.get_stream(),
            word_pos: self.rng.get_word_pos(),
            buffer: self.buffer,
            buffered: self.buffered,
            bits_consumed: self.bits_consumed,
        }
    }

    pub fn restore(snapshot: &RandomSnapshot) -> Self {
        let mut rng = ChaCha8Rng::from_seed(snapshot.chacha_seed);
        rng.set_stream(snapshot.stream);
        rng.set_word_pos(snapshot.word_pos);
        RandomSource {
            seed: snapshot.seed,
            rng,
            buffer: snapshot.buffer,
            buffered: snapshot.buffered,
            bits_consumed: snapshot.bits_consumed,
        }
    }
}
