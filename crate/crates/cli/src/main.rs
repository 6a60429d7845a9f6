use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use veccount::analysis::{
    cover_audit, state_space_lower_bound, AnalysisError, DEFAULT_NODE_BUDGET,
};
use veccount::baselines::{morris_accuracy_for_sigma, DMorris, NaiveShared};
use veccount::counter::{CounterConfig, CounterError, SpaceBits, VecCounter};
use veccount::harness::{Algo, HarnessError, Stream};
use veccount::trace::{sample_trace, TraceParams};

mod experiment;
mod numbers;

use numbers::{parse_list, parse_n, NValue};

/// Exit status for malformed input files.
const EXIT_INPUT: u8 = 2;
/// Exit status for invalid parameters.
const EXIT_PARAM: u8 = 3;

#[derive(Debug)]
pub struct Fail {
    code: u8,
    msg: String,
}

impl Fail {
    pub fn param(msg: impl Into<String>) -> Fail {
        Fail {
            code: EXIT_PARAM,
            msg: msg.into(),
        }
    }
    pub fn input(msg: impl Into<String>) -> Fail {
        Fail {
            code: EXIT_INPUT,
            msg: msg.into(),
        }
    }
}

impl From<CounterError> for Fail {
    fn from(e: CounterError) -> Fail {
        match e {
            CounterError::StreamOverflow { .. } | CounterError::CorruptState(_) => {
                Fail::input(e.to_string())
            }
            _ => Fail::param(e.to_string()),
        }
    }
}

impl From<HarnessError> for Fail {
    fn from(e: HarnessError) -> Fail {
        match e {
            HarnessError::StreamFile { .. } | HarnessError::Io(_) => Fail::input(e.to_string()),
            HarnessError::Counter(c) => c.into(),
            HarnessError::InvalidSpec(_) => Fail::param(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Fail {
    fn from(e: AnalysisError) -> Fail {
        Fail::param(e.to_string())
    }
}

type CmdResult = Result<String, Fail>;

#[derive(Parser)]
#[command(
    name = "veccount",
    version,
    about = "Shared-scale approximate vector counter"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count a stream and print the estimate vector.
    Run(RunArgs),
    /// Print the state changes of a small counter on a random stream.
    Trace(TraceArgs),
    /// Monte Carlo statistics of a counter on a fixed stream (TSV).
    Experiment(experiment::ExperimentArgs),
    /// Lower bound versus implemented space (TSV).
    Bounds(BoundsArgs),
    /// Check that the reachable estimates cover the lattice shell.
    Cover(CoverArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Stream file (text `d=<d>` header, or `u32` LE with --binary).
    #[arg(long)]
    stream: PathBuf,
    /// Maximum stream length; defaults to this stream's length.
    #[arg(long)]
    n: Option<u64>,
    /// Dimension; required with --binary.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "veccount")]
    algo: String,
    /// Read the stream as little-endian u32 coordinates.
    #[arg(long)]
    binary: bool,
    /// Resume a saved counter (veccount only).
    #[arg(long)]
    state_in: Option<PathBuf>,
    /// Save the counter after the stream (veccount only).
    #[arg(long)]
    state_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    a_naive: u64,
    #[arg(long)]
    morris_a: Option<f64>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 12)]
    mstar: u64,
    /// Comma-separated probabilities.
    #[arg(long, default_value = "0.5,0.25,0.125,0.125")]
    dist: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    steps: u64,
}

#[derive(Args)]
struct BoundsArgs {
    /// Comma-separated stream lengths, integers or `2^k`.
    #[arg(long)]
    n: String,
    #[arg(long)]
    d: String,
    #[arg(long)]
    sigma: String,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 200)]
    max_increments: u64,
    /// Cover level as a multiple of sigma.
    #[arg(long, default_value_t = 4.0)]
    level: f64,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: usize,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let algo: Algo = args.algo.parse()?;
    if args.binary && args.d.is_none() {
        return Err(Fail::param("--binary needs --d"));
    }
    let stream = Stream::read(&args.stream, args.binary.then(|| args.d.unwrap_or(0)))?;
    if let Some(d) = args.d {
        if d != stream.d() {
            return Err(Fail::input(format!(
                "stream has d={} but --d is {d}",
                stream.d()
            )));
        }
    }
    if (args.state_in.is_some() || args.state_out.is_some()) && algo != Algo::VecCount {
        return Err(Fail::param("--state-in/--state-out need --algo veccount"));
    }
    let d = stream.d();

    if algo == Algo::VecCount {
        let mut counter = match &args.state_in {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .map_err(|e| Fail::input(format!("{}: {e}", path.display())))?;
                let counter = VecCounter::deserialize(&bytes)?;
                let c = counter.config();
                if c.d() != d
                    || args.n.is_some_and(|n| n != c.n())
                    || args.sigma.is_some_and(|s| s != c.sigma())
                {
                    return Err(Fail::param("flags disagree with the saved counter"));
                }
                counter
            }
            None => {
                let sigma = args
                    .sigma
                    .ok_or_else(|| Fail::param("--sigma is required"))?;
                let n = args.n.unwrap_or(stream.len() as u64).max(1);
                VecCounter::with_params(n, d, sigma, args.seed)?
            }
        };
        counter.extend(stream.iter())?;
        if let Some(path) = &args.state_out {
            std::fs::write(path, counter.serialize())
                .map_err(|e| Fail::param(format!("{}: {e}", path.display())))?;
        }
        let s = counter.state();
        eprintln!(
            "U={} psi={} failed={} increments={}",
            s.u(),
            counter.psi(),
            s.failed(),
            counter.increments()
        );
        return Ok(format!("{}\n", join(&counter.query())));
    }

    let n = args.n.unwrap_or(stream.len() as u64);
    if (stream.len() as u64) > n {
        return Err(Fail::input(format!("stream has more than n={n} events")));
    }
    let estimate = match algo {
        Algo::DMorris => {
            let a = match args.morris_a {
                Some(a) => a,
                None => {
                    let sigma = args
                        .sigma
                        .ok_or_else(|| Fail::param("--sigma or --morris-a is required"))?;
                    if !(sigma > 0.0 && sigma < 1.0) {
                        return Err(Fail::param(format!("sigma must be in (0, 1), got {sigma}")));
                    }
                    morris_accuracy_for_sigma(sigma)
                }
            };
            let mut c = DMorris::new(d, a, args.seed)?;
            for j in stream.iter() {
                c.increment(j)?;
            }
            c.query()
        }
        Algo::Naive => {
            let mut c = NaiveShared::new(d, args.a_naive, args.seed)?;
            for j in stream.iter() {
                c.increment(j)?;
            }
            c.query()
        }
        Algo::VecCount => unreachable!(),
    };
    Ok(format!("{}\n", join(&estimate)))
}

fn cmd_trace(args: TraceArgs) -> CmdResult {
    let dist = parse_list(&args.dist, "--dist", |s| s.parse::<f64>().ok())?;
    let rows = sample_trace(&TraceParams {
        d: args.d,
        m_star: args.mstar,
        dist,
        seed: args.seed,
        steps: args.steps,
    })?;
    eprintln!(
        "columns: U | V | estimate | x | encoded V ({} rows)",
        rows.len()
    );
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{r}").unwrap();
    }
    Ok(out)
}

/// Space of the implemented counter for the given stream length.
fn implemented_bits(n: &NValue, d: usize, sigma: f64) -> Result<u64, Fail> {
    // Exact mode applies when n <= 1/sigma.
    if n.log2() <= (1.0 / sigma).log2() {
        if let Some(n) = n.exact() {
            let c = CounterConfig::new(n, d, sigma)?;
            return Ok(c.space_bits().total);
        }
    }
    Ok(SpaceBits::for_params(n.log2(), d, sigma)?.total)
}

fn cmd_bounds(args: BoundsArgs) -> CmdResult {
    let ns = parse_list(&args.n, "--n", parse_n)?;
    let ds = parse_list(&args.d, "--d", |s| s.parse::<usize>().ok())?;
    let sigmas = parse_list(&args.sigma, "--sigma", |s| s.parse::<f64>().ok())?;
    let mut out = String::from("n\td\tsigma\tlower_bits\timpl_bits\tratio\n");
    for n in &ns {
        for &d in &ds {
            for &sigma in &sigmas {
                let lower = state_space_lower_bound(n.log2(), d, sigma)?;
                let implemented = implemented_bits(n, d, sigma)?;
                writeln!(
                    out,
                    "{n}\t{d}\t{sigma}\t{:.6}\t{implemented}\t{:.6}",
                    lower.bits,
                    lower.bits / implemented as f64
                )
                .unwrap();
            }
        }
    }
    Ok(out)
}

fn cmd_cover(args: CoverArgs) -> CmdResult {
    if args.level.is_nan() || args.level <= 0.0 {
        return Err(Fail::param("--level must be positive"));
    }
    let config = CounterConfig::new(args.max_increments.max(1), args.d, args.sigma)?;
    let (report, reach) = cover_audit(&config, args.max_increments, args.level, args.node_budget)?;
    eprintln!(
        "explored {} states, {} distinct estimates; {} lattice points checked",
        reach.states,
        reach.estimates.len(),
        report.points
    );
    let mut out = String::new();
    writeln!(out, "d={}", args.d).unwrap();
    writeln!(out, "sigma={}", args.sigma).unwrap();
    writeln!(out, "level={}", report.sigma).unwrap();
    writeln!(out, "max_increments={}", args.max_increments).unwrap();
    writeln!(out, "reachable_states={}", reach.states).unwrap();
    writeln!(out, "estimates={}", reach.estimates.len()).unwrap();
    writeln!(out, "points={}", report.points).unwrap();
    writeln!(out, "worst_point={}", join(&report.worst_point)).unwrap();
    writeln!(out, "worst_ratio={}", report.worst_ratio).unwrap();
    writeln!(out, "covered={}", report.covered).unwrap();
    Ok(out)
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Experiment(a) => experiment::cmd_experiment(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Cover(a) => cmd_cover(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_PARAM)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(fail) => {
            eprintln!("error: {}", fail.msg);
            ExitCode::from(fail.code)
        }
    }
}
