use super::CounterError;
use crate::varint::packed_bit_len;

/// When a scale-up fires, relative to the symbol budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    /// Scale up once `psi(V) > M*`.
    Strict,
    /// Scale up once `psi(V) >= M*`.
    Inclusive,
}

impl Trigger {
    pub(crate) fn fires(self, psi: u64, budget: u64) -> bool {
        match self {
            Trigger::Strict => psi > budget,
            Trigger::Inclusive => psi >= budget,
        }
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            Trigger::Strict => 0,
            Trigger::Inclusive => 1,
        }
    }

    pub(crate) fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(Trigger::Strict),
            1 => Some(Trigger::Inclusive),
            _ => None,
        }
    }
}

/// Parameters of an `(n, d, sigma)` counter, derived once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterConfig {
    pub(crate) n: u64,
    pub(crate) d: usize,
    pub(crate) sigma: f64,
    pub(crate) a: u64,
    pub(crate) m_star: u64,
    pub(crate) u_star: u64,
    pub(crate) trigger: Trigger,
    pub(crate) deterministic_mode: bool,
}

// Ceiling that ignores floating-point noise just above an integer, so that
// e.g. 2 / 0.1^2 = 200.00000000000003 rounds to 200.
fn ceil_tol(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `log2(2^log2_x + 1)` without overflowing for huge `x`.
pub(crate) fn log2_plus_one(log2_x: f64) -> f64 {
    if log2_x > 0.0 {
        log2_x + (-log2_x).exp2().ln_1p() / std::f64::consts::LN_2
    } else {
        log2_x.exp2().ln_1p() / std::f64::consts::LN_2
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<(), CounterError> {
    if !(sigma > 0.0 && sigma < 1.0 / 3.0) {
        return Err(CounterError::InvalidParam(format!(
            "sigma must lie in (0, 1/3), got {sigma}"
        )));
    }
    Ok(())
}

/// Accuracy parameter `a = ceil(2 / sigma^2)`.
pub fn accuracy_for_sigma(sigma: f64) -> u64 {
    ceil_tol(2.0 / (sigma * sigma)) as u64
}

/// Symbol budget `M* = 4d + ceil(d * log2(1 + a))`.
pub fn symbol_budget(d: usize, a: u64) -> u64 {
    4 * d as u64 + ceil_tol(d as f64 * (1.0 + a as f64).log2()) as u64
}

/// Scale cap `U* = ceil(log2(2 / sigma^2) + log2(n / (a d) + 1))`, with the
/// stream length given as `log2 n` so astronomically long streams can be
/// accounted for.
pub fn scale_cap_log2n(log2_n: f64, d: usize, a: u64, sigma: f64) -> u64 {
    let tau_inv = (2.0 / (sigma * sigma)).log2();
    let ratio = log2_n - (a as f64 * d as f64).log2();
    ceil_tol(tau_inv + log2_plus_one(ratio)).max(1.0) as u64
}

impl CounterConfig {
    pub fn new(n: u64, d: usize, sigma: f64) -> Result<Self, CounterError> {
        if n < 1 {
            return Err(CounterError::InvalidParam("n must be at least 1".into()));
        }
        if d < 1 {
            return Err(CounterError::InvalidParam("d must be at least 1".into()));
        }
        check_sigma(sigma)?;
        let a = accuracy_for_sigma(sigma);
        Ok(CounterConfig {
            n,
            d,
            sigma,
            a,
            m_star: symbol_budget(d, a),
            u_star: scale_cap_log2n((n as f64).log2(), d, a, sigma),
            trigger: Trigger::Strict,
            deterministic_mode: (n as f64) <= 1.0 / sigma,
        })
    }

    /// Overrides the symbol budget. The budget must be at least `3d`, which
    /// is what guarantees a single scale-up always brings `psi(V)` back
    /// under budget.
    pub fn with_m_star(mut self, m_star: u64) -> Result<Self, CounterError> {
        if m_star < 3 * self.d as u64 {
            return Err(CounterError::InvalidParam(format!(
                "symbol budget {m_star} is below 3d = {}",
                3 * self.d
            )));
        }
        self.m_star = m_star;
        Ok(self)
    }

    pub fn with_trigger(mut self, trigger: Trigger) -> Self {
        self.trigger = trigger;
        self
    }

    /// Forces the randomized counter (or the exact fallback) regardless of
    /// the `n <= 1/sigma` rule.
    pub fn with_deterministic_mode(mut self, on: bool) -> Self {
        self.deterministic_mode = on;
        self
    }

    pub fn with_u_star(mut self, u_star: u64) -> Result<Self, CounterError> {
        if u_star < 1 {
            return Err(CounterError::InvalidParam(
                "u_star must be at least 1".into(),
            ));
        }
        self.u_star = u_star;
        Ok(self)
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn a(&self) -> u64 {
        self.a
    }
    pub fn m_star(&self) -> u64 {
        self.m_star
    }
    pub fn u_star(&self) -> u64 {
        self.u_star
    }
    pub fn trigger(&self) -> Trigger {
        self.trigger
    }
    pub fn deterministic_mode(&self) -> bool {
        self.deterministic_mode
    }

    /// Failure probability budget `tau = sigma^2 / 2`.
    pub fn tau(&self) -> f64 {
        self.sigma * self.sigma / 2.0
    }

    /// `5 / (6a - 2) + tau`, the guaranteed relative MSE of this configuration.
    pub fn mse_bound(&self) -> f64 {
        5.0 / (6.0 * self.a as f64 - 2.0) + self.tau()
    }

    /// `log2(n / (a d) + 1)`, the offset in the scale-counter tail bound.
    pub fn scale_offset(&self) -> f64 {
        log2_plus_one((self.n as f64).log2() - (self.a as f64 * self.d as f64).log2())
    }

    /// Range `psi(V)` stays in once the first scale-up has happened.
    pub fn steady_psi_range(&self) -> (u64, u64) {
        let two_d = 2 * self.d as u64;
        match self.trigger {
            Trigger::Strict => ((self.m_star + 1).saturating_sub(two_d), self.m_star),
            Trigger::Inclusive => (self.m_star.saturating_sub(two_d), self.m_star - 1),
        }
    }

    pub fn space_bits(&self) -> SpaceBits {
        if self.deterministic_mode {
            let per = bits_for_states(self.n + 1);
            return SpaceBits {
                u_bits: 0,
                v_bits: per * self.d as u64,
                total: per * self.d as u64,
            };
        }
        SpaceBits::from_budget(self.u_star, self.m_star)
    }
}

/// `ceil(log2(states))`.
pub(crate) fn bits_for_states(states: u64) -> u64 {
    if states <= 1 {
        0
    } else {
        u64::from(64 - (states - 1).leading_zeros())
    }
}

/// Information-theoretic size of a counter's state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceBits {
    /// `ceil(log2(U* + 1))`; the extra value is the fail state.
    pub u_bits: u64,
    /// `ceil(M* log2 3)`.
    pub v_bits: u64,
    pub total: u64,
}

impl SpaceBits {
    pub fn from_budget(u_star: u64, m_star: u64) -> SpaceBits {
        let u_bits = bits_for_states(u_star + 1);
        let v_bits = packed_bit_len(m_star);
        SpaceBits {
            u_bits,
            v_bits,
            total: u_bits + v_bits,
        }
    }

    /// Space of the randomized counter for a stream of length `2^log2_n`.
    pub fn for_params(log2_n: f64, d: usize, sigma: f64) -> Result<SpaceBits, CounterError> {
        check_sigma(sigma)?;
        if d < 1 {
            return Err(CounterError::InvalidParam("d must be at least 1".into()));
        }
        let a = accuracy_for_sigma(sigma);
        Ok(SpaceBits::from_budget(
            scale_cap_log2n(log2_n, d, a, sigma),
            symbol_budget(d, a),
        ))
    }
}
