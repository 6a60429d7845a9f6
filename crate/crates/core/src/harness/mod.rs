//! Seeded Monte Carlo experiments.
//!
//! A run fixes one input stream (generated once from the base seed) and
//! replays it through many independent counters; trial `i` seeds its
//! counter with `base_seed + i`. Per-trial results are collected in trial
//! order and reduced with pairwise summation in that order, so the output
//! is bit-identical no matter how many threads ran the trials.
//!
//! Tolerances elsewhere in the crate use 4 standard errors, which has a
//! two-sided false-alarm rate of about `6e-5` per check.

mod stream;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{morris_accuracy_for_sigma, DMorris, NaiveShared};
use crate::counter::{CounterConfig, CounterError, VecCounter};

pub use stream::{generate_stream, Stream, StreamSource};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("stream file, line {line}: {msg}")]
    StreamFile { line: usize, msg: String },
    #[error("stream file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Counter(#[from] CounterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    VecCount,
    DMorris,
    Naive,
}

impl FromStr for Algo {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "veccount" => Ok(Algo::VecCount),
            "dmorris" => Ok(Algo::DMorris),
            "naive" => Ok(Algo::Naive),
            other => Err(HarnessError::InvalidSpec(format!(
                "unknown algorithm {other:?} (expected veccount, dmorris or naive)"
            ))),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::VecCount => "veccount",
            Algo::DMorris => "dmorris",
            Algo::Naive => "naive",
        })
    }
}

/// Any counter the harness can drive.
pub trait Estimator {
    fn increment(&mut self, j: usize) -> Result<(), CounterError>;
    fn query(&self) -> Vec<f64>;
    /// Scale-like summary recorded in the histogram: `U` for the shared
    /// scale counters, the largest index for independent Morris counters.
    fn scale(&self) -> u64;
    fn failed(&self) -> bool {
        false
    }
}

impl Estimator for VecCounter {
    fn increment(&mut self, j: usize) -> Result<(), CounterError> {
        VecCounter::increment(self, j).map(|_| ())
    }
    fn query(&self) -> Vec<f64> {
        VecCounter::query(self)
    }
    fn scale(&self) -> u64 {
        self.state().u()
    }
    fn failed(&self) -> bool {
        self.state().failed()
    }
}

impl Estimator for DMorris {
    fn increment(&mut self, j: usize) -> Result<(), CounterError> {
        DMorris::increment(self, j)
    }
    fn query(&self) -> Vec<f64> {
        DMorris::query(self)
    }
    fn scale(&self) -> u64 {
        self.counters().iter().map(|m| m.index()).max().unwrap_or(0)
    }
}

impl Estimator for NaiveShared {
    fn increment(&mut self, j: usize) -> Result<(), CounterError> {
        NaiveShared::increment(self, j)
    }
    fn query(&self) -> Vec<f64> {
        NaiveShared::query(self)
    }
    fn scale(&self) -> u64 {
        self.u()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub algo: Algo,
    /// Maximum stream length; defaults to the stream's length.
    pub n: Option<u64>,
    pub d: usize,
    pub sigma: f64,
    pub source: StreamSource,
    pub trials: u64,
    pub base_seed: u64,
    /// Entry cap of the naive counter.
    pub a_naive: u64,
    /// Morris parameter; defaults to `ceil(1 / (2 sigma^2))`.
    pub morris_a: Option<f64>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(
        algo: Algo,
        d: usize,
        sigma: f64,
        source: StreamSource,
        trials: u64,
        base_seed: u64,
    ) -> Self {
        ExperimentSpec {
            algo,
            n: None,
            d,
            sigma,
            source,
            trials,
            base_seed,
            a_naive: 2,
            morris_a: None,
            threads: None,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials < 1 {
            return Err(HarnessError::InvalidSpec("trials must be >= 1".into()));
        }
        if self.d < 1 {
            return Err(HarnessError::InvalidSpec("d must be >= 1".into()));
        }
        if let StreamSource::Categorical { probs, .. } = &self.source {
            stream::check_distribution(probs, self.d)?;
        }
        Ok(())
    }

    fn build(&self, n: u64, seed: u64) -> Result<Box<dyn Estimator>, CounterError> {
        Ok(match self.algo {
            Algo::VecCount => Box::new(VecCounter::with_params(n, self.d, self.sigma, seed)?),
            Algo::DMorris => {
                let a = match self.morris_a {
                    Some(a) => a,
                    None => {
                        crate::counter::check_sigma(self.sigma)?;
                        morris_accuracy_for_sigma(self.sigma)
                    }
                };
                Box::new(DMorris::new(self.d, a, seed)?)
            }
            Algo::Naive => Box::new(NaiveShared::new(self.d, self.a_naive, seed)?),
        })
    }
}

/// Aggregate of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    pub trials: u64,
    /// The true count vector.
    pub x: Vec<u64>,
    pub mean_estimate: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    /// `E|x_hat - x|^2`.
    pub mse: f64,
    pub mse_stderr: f64,
    /// `mse / |x|^2` (zero when `x = 0`).
    pub relative_mse: f64,
    pub relative_mse_stderr: f64,
    pub u_histogram: BTreeMap<u64, u64>,
    pub fail_count: u64,
    /// Counter configuration when the algorithm is `veccount`.
    pub config: Option<CounterConfig>,
}

impl TrialStats {
    /// Fraction of trials with scale at least `threshold`, and its
    /// binomial standard error.
    pub fn scale_tail(&self, threshold: f64) -> (f64, f64) {
        let hits: u64 = self
            .u_histogram
            .iter()
            .filter(|(&u, _)| u as f64 >= threshold)
            .map(|(_, &c)| c)
            .sum();
        proportion(hits, self.trials)
    }

    pub fn fail_fraction(&self) -> (f64, f64) {
        proportion(self.fail_count, self.trials)
    }

    pub fn x_norm_sq(&self) -> f64 {
        self.x.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

fn proportion(hits: u64, trials: u64) -> (f64, f64) {
    let p = hits as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Sum with pairwise (cascade) summation; the result depends only on the
/// order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and standard error of the mean.
fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct TrialOutcome {
    estimate: Vec<f64>,
    sq_err: f64,
    scale: u64,
    failed: bool,
}

fn run_one(
    spec: &ExperimentSpec,
    stream: &Stream,
    x: &[u64],
    n: u64,
    seed: u64,
) -> Result<TrialOutcome, CounterError> {
    let mut counter = spec.build(n, seed)?;
    for j in stream.iter() {
        counter.increment(j)?;
    }
    let estimate = counter.query();
    let sq_err = estimate
        .iter()
        .zip(x)
        .map(|(e, &t)| (e - t as f64) * (e - t as f64))
        .sum();
    Ok(TrialOutcome {
        estimate,
        sq_err,
        scale: counter.scale(),
        failed: counter.failed(),
    })
}

/// Generates the spec's stream and runs the trials.
pub fn run_trials(spec: &ExperimentSpec) -> Result<TrialStats, HarnessError> {
    spec.validate()?;
    let stream = generate_stream(&spec.source, spec.d, spec.base_seed)?;
    run_trials_on(spec, &stream)
}

/// Runs the trials on a prepared stream (the spec's `source` is ignored).
pub fn run_trials_on(spec: &ExperimentSpec, stream: &Stream) -> Result<TrialStats, HarnessError> {
    spec.validate()?;
    if stream.d() != spec.d {
        return Err(HarnessError::InvalidSpec(format!(
            "stream has d={} but the experiment uses d={}",
            stream.d(),
            spec.d
        )));
    }
    let n = spec.n.unwrap_or(stream.len() as u64).max(1);
    let x = stream.counts();

    let work = || -> Result<Vec<TrialOutcome>, CounterError> {
        (0..spec.trials)
            .into_par_iter()
            .map(|i| run_one(spec, stream, &x, n, spec.base_seed.wrapping_add(i)))
            .collect()
    };
    let outcomes = match spec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::InvalidSpec(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let d = spec.d;
    let mut mean_estimate = Vec::with_capacity(d);
    let mut mean_stderr_v = Vec::with_capacity(d);
    let mut column = Vec::with_capacity(outcomes.len());
    for j in 0..d {
        column.clear();
        column.extend(outcomes.iter().map(|o| o.estimate[j]));
        let (m, se) = mean_stderr(&column);
        mean_estimate.push(m);
        mean_stderr_v.push(se);
    }
    let errs: Vec<f64> = outcomes.iter().map(|o| o.sq_err).collect();
    let (mse, mse_stderr) = mean_stderr(&errs);
    let norm_sq: f64 = x.iter().map(|&v| (v as f64) * (v as f64)).sum();
    let (relative_mse, relative_mse_stderr) = if norm_sq > 0.0 {
        (mse / norm_sq, mse_stderr / norm_sq)
    } else {
        (0.0, 0.0)
    };
    let mut u_histogram = BTreeMap::new();
    for o in &outcomes {
        *u_histogram.entry(o.scale).or_insert(0) += 1;
    }
    let fail_count = outcomes.iter().filter(|o| o.failed).count() as u64;
    let config = match spec.algo {
        Algo::VecCount => Some(CounterConfig::new(n, d, spec.sigma)?),
        _ => None,
    };

    Ok(TrialStats {
        trials: spec.trials,
        x,
        mean_estimate,
        mean_stderr: mean_stderr_v,
        mse,
        mse_stderr,
        relative_mse,
        relative_mse_stderr,
        u_histogram,
        fail_count,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn categorical(length: usize) -> StreamSource {
        StreamSource::Categorical {
            probs: vec![0.5, 0.25, 0.125, 0.125],
            length,
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 49_995_000.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn deterministic_mode_has_zero_error() {
        let spec = ExperimentSpec::new(Algo::VecCount, 4, 0.3, categorical(3), 1, 5);
        let stats = run_trials(&spec).unwrap();
        assert_eq!(stats.mse, 0.0);
        assert_eq!(stats.relative_mse, 0.0);
        assert!(stats.config.unwrap().deterministic_mode());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut spec = ExperimentSpec::new(Algo::VecCount, 4, 0.3, categorical(2000), 300, 11);
        spec.threads = Some(1);
        let one = run_trials(&spec).unwrap();
        spec.threads = Some(4);
        let four = run_trials(&spec).unwrap();
        assert_eq!(one, four);
        assert_eq!(one.u_histogram.values().sum::<u64>(), 300);
    }

    #[test]
    fn every_algorithm_runs() {
        for algo in [Algo::VecCount, Algo::DMorris, Algo::Naive] {
            let spec = ExperimentSpec::new(algo, 4, 0.3, categorical(1000), 50, 3);
            let stats = run_trials(&spec).unwrap();
            assert_eq!(stats.x.iter().sum::<u64>(), 1000);
            assert_eq!(stats.u_histogram.values().sum::<u64>(), 50);
            assert!((stats.relative_mse - stats.mse / stats.x_norm_sq()).abs() < 1e-15);
        }
    }

    #[test]
    fn short_n_is_an_error() {
        let mut spec = ExperimentSpec::new(Algo::VecCount, 4, 0.3, categorical(100), 2, 3);
        spec.n = Some(50);
        assert!(matches!(
            run_trials(&spec),
            Err(HarnessError::Counter(CounterError::StreamOverflow {
                n: 50
            }))
        ));
    }

    #[test]
    fn algo_names() {
        for a in [Algo::VecCount, Algo::DMorris, Algo::Naive] {
            assert_eq!(a.to_string().parse::<Algo>().unwrap(), a);
        }
        assert!("cms".parse::<Algo>().is_err());
    }
}
