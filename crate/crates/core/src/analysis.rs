//! Covering checks and space lower bounds.
//!
//! A set `R` is a `sigma`-multiplicative cover of `A` when every `x` in `A`
//! has some `y` in `R` with `|x - y| < sigma |x|`. The estimates a correct
//! counter can output must cover every count vector it may face, which
//! turns covering-number lower bounds into state-space lower bounds.
//!
//! All logarithms in the bound formulas are natural logarithms.

use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;
use thiserror::Error;

use crate::counter::{check_sigma, CounterConfig, CounterError};
use crate::varint::psi_vec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("candidate cover R is empty")]
    EmptyR,
    #[error("state exploration exceeded the budget of {budget} states")]
    BudgetExceeded {
        budget: usize,
        partial: Box<ReachableEstimates>,
    },
    #[error(transparent)]
    Counter(#[from] CounterError),
}

/// Outcome of [`verify_cover`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverReport {
    /// The point of `A` farthest (relatively) from `R`; first one on ties.
    pub worst_point: Vec<f64>,
    /// `max_{x in A} min_{y in R} |x - y| / |x|`.
    pub worst_ratio: f64,
    pub sigma: f64,
    pub covered: bool,
    pub points: usize,
    pub candidates: usize,
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Exact brute-force check that `r` is a `sigma`-multiplicative cover of `a`.
pub fn verify_cover(
    r: &[Vec<f64>],
    a: &[Vec<f64>],
    sigma: f64,
) -> Result<CoverReport, AnalysisError> {
    if r.is_empty() {
        return Err(AnalysisError::EmptyR);
    }
    if a.is_empty() {
        return Err(AnalysisError::InvalidParam("target set A is empty".into()));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(AnalysisError::InvalidParam(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let d = a[0].len();
    if a.iter().chain(r).any(|p| p.len() != d) {
        return Err(AnalysisError::InvalidParam(
            "points of mixed dimension".into(),
        ));
    }
    if a.iter().any(|x| norm_sq(x) == 0.0) {
        return Err(AnalysisError::InvalidParam(
            "A contains the zero vector".into(),
        ));
    }

    let flat: Vec<f64> = r.iter().flatten().copied().collect();
    let ratios: Vec<f64> = a
        .par_iter()
        .map(|x| {
            let best = flat
                .chunks_exact(d)
                .map(|y| y.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            (best / norm_sq(x)).sqrt()
        })
        .collect();

    let (worst_idx, worst_ratio) =
        ratios
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, q)| if q > acc.1 { (i, q) } else { acc },
            );
    Ok(CoverReport {
        worst_point: a[worst_idx].clone(),
        worst_ratio,
        sigma,
        covered: worst_ratio < sigma,
        points: a.len(),
        candidates: r.len(),
    })
}

/// All vectors of natural numbers whose Euclidean norm lies in `[lo, hi]`.
pub fn lattice_shell(d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    fn walk(
        d: usize,
        prefix: &mut Vec<u64>,
        sq: u64,
        lo_sq: f64,
        hi_sq: f64,
        out: &mut Vec<Vec<f64>>,
    ) {
        if prefix.len() == d {
            if sq as f64 >= lo_sq {
                out.push(prefix.iter().map(|&v| v as f64).collect());
            }
            return;
        }
        let mut v = 0u64;
        while (sq + v * v) as f64 <= hi_sq {
            prefix.push(v);
            walk(d, prefix, sq + v * v, lo_sq, hi_sq, out);
            prefix.pop();
            v += 1;
        }
    }
    let mut out = Vec::new();
    if d > 0 && hi >= lo && hi >= 0.0 {
        walk(d, &mut Vec::with_capacity(d), 0, lo * lo, hi * hi, &mut out);
    }
    out
}

/// Estimates reachable by a counter within a bounded number of increments.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableEstimates {
    /// Distinct estimates `2^U V`, sorted lexicographically.
    pub estimates: Vec<Vec<f64>>,
    /// Number of distinct `(U, V)` states visited.
    pub states: usize,
    /// False when the exploration stopped at the node budget.
    pub complete: bool,
}

pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// Breadth-first exploration of the counter's `(U, V)` states over every
/// coordinate choice, both outcomes of each `2^-U` coin and both signs of
/// each rounding, up to `max_increments` steps. States that hit the fail
/// state are dropped. Exploration order is fixed, so the result is
/// deterministic.
pub fn reachable_estimates(
    config: &CounterConfig,
    max_increments: u64,
    node_budget: usize,
) -> Result<ReachableEstimates, AnalysisError> {
    let d = config.d();
    if config.deterministic_mode() {
        return exact_estimates(d, max_increments, node_budget);
    }

    type State = (u64, Vec<u64>);
    let start: State = (0, vec![0; d]);
    let mut seen: HashSet<State> = HashSet::new();
    let mut order: Vec<State> = Vec::new();
    let mut queue: VecDeque<(State, u64)> = VecDeque::new();
    seen.insert(start.clone());
    order.push(start.clone());
    queue.push_back((start, 0));

    let mut complete = true;
    'bfs: while let Some(((u, v), depth)) = queue.pop_front() {
        if depth == max_increments {
            continue;
        }
        for j in 0..d {
            let mut bumped = v.clone();
            bumped[j] += 1;
            let mut next: Vec<State> = Vec::new();
            if config.trigger().fires(psi_vec(&bumped), config.m_star()) {
                if u + 1 >= config.u_star() {
                    continue;
                }
                for rounded in all_roundings(&bumped) {
                    next.push((u + 1, rounded));
                }
            } else {
                next.push((u, bumped));
            }
            for state in next {
                if seen.contains(&state) {
                    continue;
                }
                if seen.len() >= node_budget {
                    complete = false;
                    break 'bfs;
                }
                seen.insert(state.clone());
                order.push(state.clone());
                queue.push_back((state, depth + 1));
            }
        }
    }

    let mut estimates: Vec<Vec<f64>> = order
        .iter()
        .map(|(u, v)| {
            let scale = (*u as f64).exp2();
            v.iter().map(|&e| e as f64 * scale).collect()
        })
        .collect();
    estimates.sort_by(|x, y| x.partial_cmp(y).expect("finite estimates"));
    estimates.dedup();
    let result = ReachableEstimates {
        estimates,
        states: order.len(),
        complete,
    };
    if complete {
        Ok(result)
    } else {
        Err(AnalysisError::BudgetExceeded {
            budget: node_budget,
            partial: Box::new(result),
        })
    }
}

/// Every halving of `v` that the rounding coins can produce, in a fixed
/// order (down before up, earlier coordinates varying slowest).
fn all_roundings(v: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::with_capacity(v.len())];
    for &e in v {
        if e % 2 == 0 {
            out.iter_mut().for_each(|w| w.push(e / 2));
        } else {
            out = out
                .into_iter()
                .flat_map(|w| {
                    let mut down = w.clone();
                    down.push(e / 2);
                    let mut up = w;
                    up.push(e / 2 + 1);
                    [down, up]
                })
                .collect();
        }
    }
    out
}

fn exact_estimates(
    d: usize,
    max_increments: u64,
    node_budget: usize,
) -> Result<ReachableEstimates, AnalysisError> {
    fn walk(
        d: usize,
        left: u64,
        prefix: &mut Vec<u64>,
        out: &mut Vec<Vec<f64>>,
        budget: usize,
    ) -> bool {
        if prefix.len() == d {
            if out.len() >= budget {
                return false;
            }
            out.push(prefix.iter().map(|&v| v as f64).collect());
            return true;
        }
        for v in 0..=left {
            prefix.push(v);
            let ok = walk(d, left - v, prefix, out, budget);
            prefix.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    let mut estimates = Vec::new();
    let complete = walk(
        d,
        max_increments,
        &mut Vec::new(),
        &mut estimates,
        node_budget,
    );
    let states = estimates.len();
    let result = ReachableEstimates {
        estimates,
        states,
        complete,
    };
    if complete {
        Ok(result)
    } else {
        Err(AnalysisError::BudgetExceeded {
            budget: node_budget,
            partial: Box::new(result),
        })
    }
}

/// Audits the reachable estimates of `config` within `max_increments`
/// steps against the integer points of the shell
/// `sqrt(d)/sigma <= |x| <= max_increments / sqrt(d)` at level
/// `level_multiplier * sigma`.
///
/// The shell here is the integer lattice inside the real shell, so this is
/// a check on a subset of the real-valued covering statement.
pub fn cover_audit(
    config: &CounterConfig,
    max_increments: u64,
    level_multiplier: f64,
    node_budget: usize,
) -> Result<(CoverReport, ReachableEstimates), AnalysisError> {
    let d = config.d() as f64;
    let reach = reachable_estimates(config, max_increments, node_budget)?;
    let lo = d.sqrt() / config.sigma();
    let hi = max_increments as f64 / d.sqrt();
    let shell = lattice_shell(config.d(), lo, hi);
    if shell.is_empty() {
        return Err(AnalysisError::InvalidParam(format!(
            "no lattice points with norm in [{lo}, {hi}]"
        )));
    }
    let report = verify_cover(&reach.estimates, &shell, level_multiplier * config.sigma())?;
    Ok((report, reach))
}

/// Minimum size of a `sigma`-multiplicative cover of the positive-orthant
/// shell with radii in `[alpha, beta]`:
/// `(1/3) 2^-d sigma^-d ln(beta / (e alpha))`, clamped at zero.
pub fn shell_cover_lower_bound(
    alpha: f64,
    beta: f64,
    d: usize,
    sigma: f64,
) -> Result<f64, AnalysisError> {
    if !(alpha > 0.0 && alpha < beta) {
        return Err(AnalysisError::InvalidParam(format!(
            "need 0 < alpha < beta, got alpha={alpha} beta={beta}"
        )));
    }
    if d < 1 {
        return Err(AnalysisError::InvalidParam("d must be at least 1".into()));
    }
    check_sigma(sigma)?;
    let layers = (beta / alpha).ln() - 1.0;
    if layers <= 0.0 {
        return Ok(0.0);
    }
    let d = d as f64;
    let ln_bound = -(3f64.ln()) - d * std::f64::consts::LN_2 - d * sigma.ln() + layers.ln();
    Ok(ln_bound.exp())
}

/// Lower bound on the state space of any `(n, d, sigma)` counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceBound {
    /// `(1/3) 2^-d (4 sigma)^-d ln(n / (e d / sigma))`, at least 1.
    pub states: f64,
    /// `log2(states)`.
    pub bits: f64,
}

/// State-space lower bound for a stream of length `2^log2_n`.
pub fn state_space_lower_bound(
    log2_n: f64,
    d: usize,
    sigma: f64,
) -> Result<StateSpaceBound, AnalysisError> {
    if log2_n.is_nan() || log2_n * std::f64::consts::LN_2 < 2.0 - 1e-12 {
        return Err(AnalysisError::InvalidParam(format!(
            "need n >= e^2, got log2 n = {log2_n}"
        )));
    }
    if d < 1 {
        return Err(AnalysisError::InvalidParam("d must be at least 1".into()));
    }
    check_sigma(sigma)?;
    let df = d as f64;
    // ln(n / (e * d / sigma))
    let layers = log2_n * std::f64::consts::LN_2 - 1.0 + sigma.ln() - df.ln();
    if layers <= 0.0 {
        return Ok(StateSpaceBound {
            states: 1.0,
            bits: 0.0,
        });
    }
    let bits = -(3f64.log2()) - df - df * (4.0 * sigma).log2() + layers.log2();
    if bits <= 0.0 {
        return Ok(StateSpaceBound {
            states: 1.0,
            bits: 0.0,
        });
    }
    Ok(StateSpaceBound {
        states: bits.exp2(),
        bits,
    })
}

/// Additive error `epsilon` (as a fraction of the stream length) a
/// Count-Min sketch would need for its vector estimate to reach relative
/// error `sigma`: `sigma / d`.
pub fn countmin_epsilon_requirement(d: usize, sigma: f64) -> Result<f64, AnalysisError> {
    if d < 1 {
        return Err(AnalysisError::InvalidParam("d must be at least 1".into()));
    }
    Ok(sigma / d as f64)
}
