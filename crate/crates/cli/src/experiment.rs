//! The `experiment` subcommand. Settings come from a flat `key=value` file
//! (`#` starts a comment) and/or flags; flags win.
//!
//! Keys: algo, n, d, sigma, trials, seed, stream, binary, dist, length,
//! adversarial (`s,a,hot`), a_naive, morris_a, threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use veccount::harness::{run_trials, Algo, ExperimentSpec, StreamSource, TrialStats};

use crate::numbers::parse_list;
use crate::{CmdResult, Fail};

const KEYS: &[&str] = &[
    "algo",
    "n",
    "d",
    "sigma",
    "trials",
    "seed",
    "stream",
    "binary",
    "dist",
    "length",
    "adversarial",
    "a_naive",
    "morris_a",
    "threads",
];

#[derive(Args)]
pub struct ExperimentArgs {
    /// Settings file of key=value lines.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Stream file.
    #[arg(long)]
    stream: Option<String>,
    #[arg(long)]
    binary: bool,
    /// Comma-separated probabilities for a random stream.
    #[arg(long)]
    dist: Option<String>,
    /// Length of the random stream.
    #[arg(long)]
    length: Option<String>,
    /// Adversarial stream for the naive counter, as `s,a,hot`.
    #[arg(long)]
    adversarial: Option<String>,
    #[arg(long)]
    a_naive: Option<String>,
    #[arg(long)]
    morris_a: Option<String>,
    #[arg(long, env = "VECCOUNT_THREADS")]
    threads: Option<String>,
}

fn read_spec_file(path: &PathBuf) -> Result<BTreeMap<String, String>, Fail> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Fail::input(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Fail::param(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Fail::param(format!(
                "{}:{}: unknown key {k:?}",
                path.display(),
                i + 1
            )));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn settings(args: ExperimentArgs) -> Result<BTreeMap<String, String>, Fail> {
    let mut map = match &args.spec {
        Some(path) => read_spec_file(path)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("algo", args.algo),
        ("n", args.n),
        ("d", args.d),
        ("sigma", args.sigma),
        ("trials", args.trials),
        ("seed", args.seed),
        ("stream", args.stream),
        ("binary", args.binary.then(|| "true".to_string())),
        ("dist", args.dist),
        ("length", args.length),
        ("adversarial", args.adversarial),
        ("a_naive", args.a_naive),
        ("morris_a", args.morris_a),
        ("threads", args.threads),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    Ok(map)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, Fail> {
    map.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Fail::param(format!("{key}: cannot parse {v:?}")))
        })
        .transpose()
}

fn require<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, Fail> {
    get(map, key)?.ok_or_else(|| Fail::param(format!("missing setting {key}")))
}

fn build_spec(map: &BTreeMap<String, String>) -> Result<ExperimentSpec, Fail> {
    let algo: Algo = require::<String>(map, "algo")?.parse()?;
    let d: usize = require(map, "d")?;
    let sigma: f64 = require(map, "sigma")?;
    let trials: u64 = require(map, "trials")?;
    let seed: u64 = get(map, "seed")?.unwrap_or(0);

    let stream: Option<PathBuf> = get(map, "stream")?;
    let dist = map
        .get("dist")
        .map(|s| parse_list(s, "dist", |p| p.parse::<f64>().ok()))
        .transpose()?;
    let adversarial = map
        .get("adversarial")
        .map(|s| parse_adversarial(s))
        .transpose()?;
    let given = stream.is_some() as u8 + dist.is_some() as u8 + adversarial.is_some() as u8;
    if given != 1 {
        return Err(Fail::param(
            "give exactly one of stream, dist or adversarial",
        ));
    }
    let source = if let Some(path) = stream {
        StreamSource::File {
            path,
            binary: get(map, "binary")?.unwrap_or(false),
        }
    } else if let Some(probs) = dist {
        StreamSource::Categorical {
            probs,
            length: require(map, "length")?,
        }
    } else {
        let (s, a, hot) = adversarial.expect("checked above");
        StreamSource::AdversarialNaive { s, a, hot }
    };

    let mut spec = ExperimentSpec::new(algo, d, sigma, source, trials, seed);
    spec.n = get(map, "n")?;
    if let Some(a) = get(map, "a_naive")? {
        spec.a_naive = a;
    }
    spec.morris_a = get(map, "morris_a")?;
    spec.threads = get(map, "threads")?;
    if spec.threads == Some(0) {
        return Err(Fail::param("threads must be >= 1"));
    }
    Ok(spec)
}

fn parse_adversarial(s: &str) -> Result<(u32, u64, usize), Fail> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Fail::param(format!("adversarial: expected s,a,hot, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn format_stats(spec: &ExperimentSpec, stats: &TrialStats) -> String {
    let mut out = String::from("statistic\tvalue\tstderr\n");
    let mut row = |name: &str, value: String, se: String| {
        writeln!(out, "{name}\t{value}\t{se}").unwrap();
    };
    row("algo", spec.algo.to_string(), "-".into());
    row("trials", stats.trials.to_string(), "-".into());
    row(
        "stream_length",
        stats.x.iter().sum::<u64>().to_string(),
        "-".into(),
    );
    if let Some(c) = &stats.config {
        row("a", c.a().to_string(), "-".into());
        row("m_star", c.m_star().to_string(), "-".into());
        row("u_star", c.u_star().to_string(), "-".into());
        row(
            "deterministic_mode",
            c.deterministic_mode().to_string(),
            "-".into(),
        );
    }
    for (j, x) in stats.x.iter().enumerate() {
        row(&format!("x[{}]", j + 1), x.to_string(), "-".into());
    }
    for (j, (m, se)) in stats
        .mean_estimate
        .iter()
        .zip(&stats.mean_stderr)
        .enumerate()
    {
        row(
            &format!("mean_estimate[{}]", j + 1),
            m.to_string(),
            se.to_string(),
        );
    }
    row("mse", stats.mse.to_string(), stats.mse_stderr.to_string());
    row(
        "relative_mse",
        stats.relative_mse.to_string(),
        stats.relative_mse_stderr.to_string(),
    );
    if let Some(c) = &stats.config {
        row("relative_mse_bound", c.mse_bound().to_string(), "-".into());
        for r in 1..=5u32 {
            let (p, se) = stats.scale_tail(r as f64 + c.scale_offset());
            row(&format!("u_tail[{r}]"), p.to_string(), se.to_string());
        }
    }
    let (fail, fail_se) = stats.fail_fraction();
    row("fail_fraction", fail.to_string(), fail_se.to_string());
    for (u, count) in &stats.u_histogram {
        row(&format!("u_histogram[{u}]"), count.to_string(), "-".into());
    }
    out
}

pub fn cmd_experiment(args: ExperimentArgs) -> CmdResult {
    let map = settings(args)?;
    let spec = build_spec(&map)?;
    let stats = run_trials(&spec)?;
    eprintln!(
        "{} trials of {}: relative_mse = {:.6} +- {:.6}",
        stats.trials, spec.algo, stats.relative_mse, stats.relative_mse_stderr
    );
    Ok(format_stats(&spec, &stats))
}
