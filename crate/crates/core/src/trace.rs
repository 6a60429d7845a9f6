//! Step-by-step traces of a small counter: one row each time `(U, V)`
//! changes, with the estimate, the true counts and the encoded `V`.
//!
//! Rows print as `U | V | estimate | x | encoded V`, fields separated by
//! single spaces, e.g. `0 | 6 4 2 2 | 6 4 2 2 | 6 4 2 2 | 101|11|1|1|`.

use std::fmt;

use crate::counter::{CounterConfig, CounterError, Trigger, VecCounter};
use crate::harness::{generate_stream, HarnessError, StreamSource};
use crate::varint::{encode_vec, SymbolString};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub u: u64,
    pub v: Vec<u64>,
    pub estimate: Vec<u128>,
    pub x: Vec<u64>,
    pub encoded: SymbolString,
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} | {} | {} | {} | {}",
            self.u,
            join(&self.v),
            join(&self.estimate),
            join(&self.x),
            self.encoded
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceParams {
    pub d: usize,
    pub m_star: u64,
    pub dist: Vec<f64>,
    pub seed: u64,
    pub steps: u64,
}

/// Runs a counter with budget `m_star` and the inclusive trigger on a
/// random stream drawn from `dist`. The scale cap is set high enough that
/// the counter never fails within `steps` increments.
pub fn sample_trace(params: &TraceParams) -> Result<Vec<TraceRow>, HarnessError> {
    let d = params.d;
    let stream = generate_stream(
        &StreamSource::Categorical {
            probs: params.dist.clone(),
            length: params.steps as usize,
        },
        d,
        params.seed,
    )?;
    // sigma only feeds the (overridden) derived parameters here.
    let config = CounterConfig::new(params.steps.max(1), d, 0.1)?
        .with_m_star(params.m_star)?
        .with_trigger(Trigger::Inclusive)
        .with_deterministic_mode(false)
        .with_u_star(64)?;
    let mut counter = VecCounter::new(config, params.seed);
    let mut x = vec![0u64; d];
    let mut rows = vec![row(&counter, &x)];
    for j in stream.iter() {
        let before = (counter.state().u(), counter.state().v().to_vec());
        counter.increment(j).map_err(HarnessError::Counter)?;
        x[j] += 1;
        if counter.state().failed() {
            return Err(HarnessError::Counter(CounterError::InvalidParam(
                "trace counter reached its scale cap".into(),
            )));
        }
        if (counter.state().u(), counter.state().v()) != (before.0, &before.1[..]) {
            rows.push(row(&counter, &x));
        }
    }
    Ok(rows)
}

fn row(counter: &VecCounter, x: &[u64]) -> TraceRow {
    let s = counter.state();
    TraceRow {
        u: s.u(),
        v: s.v().to_vec(),
        estimate: s.v().iter().map(|&v| u128::from(v) << s.u()).collect(),
        x: x.to_vec(),
        encoded: encode_vec(s.v()),
    }
}
