//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAIL` are known to be unattainable as
//! stated; they are still evaluated in full and printed as FAIL. The run
//! exits non-zero if any other criterion fails or if an expected failure
//! starts passing (so the record can be updated).

use std::process::Command;
use std::time::{Duration, Instant};

use veccount::analysis::{cover_audit, state_space_lower_bound, DEFAULT_NODE_BUDGET};
use veccount::baselines::{morris_accuracy_for_sigma, morris_space_bits};
use veccount::harness::{
    generate_stream, run_trials, Algo, ExperimentSpec, StreamSource, TrialStats,
};
use veccount::varint::{decode_vec, encode_int, encode_vec, psi, psi_vec, SymbolString};
use veccount::{CounterConfig, RandomSource, SpaceBits, VecCounter};

/// Criterion 8 asks the shared-scale counter to beat `d` independent
/// Morris counters already at n = 2^40; by the formulas it only does so
/// at far larger n (see the printed detail).
const EXPECTED_FAIL: &[u32] = &[8];

/// One-sided 99.9% normal quantile.
const Z_999: f64 = 3.090232306167813;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn uniform(rng: &mut RandomSource) -> f64 {
    (rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
}

fn below(rng: &mut RandomSource, n: u64) -> u64 {
    rng.next_u64() % n
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut violations = 0u64;
    for k in 0..=1_000_000u64 {
        let p = psi(k);
        if p >= 2 && (1u64 << (p - 2)) > k + 1 {
            violations += 1;
        }
        if psi(k + 1) > p + 1 {
            violations += 1;
        }
        if psi(k / 2) + 2 < p {
            violations += 1;
        }
        let up = psi(k.div_ceil(2));
        if (k >= 3 && up + 1 > p) || up > p {
            violations += 1;
        }
    }
    let mut rng = RandomSource::new(1);
    for _ in 0..10_000 {
        let d = 1 + below(&mut rng, 16) as usize;
        let cap = [5, 200, 1 << 40][below(&mut rng, 3) as usize];
        let v: Vec<u64> = (0..d).map(|_| below(&mut rng, cap)).collect();
        let p = psi_vec(&v);
        let bound = 2.0 * d as f64 + v.iter().map(|&x| (1.0 + x as f64).log2()).sum::<f64>();
        if p as f64 > bound + 1e-9 {
            violations += 1;
        }
        let mut bumped = v.clone();
        bumped[below(&mut rng, d as u64) as usize] += 1;
        if psi_vec(&bumped) > p + 1 {
            violations += 1;
        }
        let down: Vec<u64> = v.iter().map(|&x| x / 2).collect();
        if psi_vec(&down) + 2 * (d as u64) < p {
            violations += 1;
        }
        if v.iter().any(|&x| x >= 3) {
            let up: Vec<u64> = v.iter().map(|&x| x.div_ceil(2)).collect();
            if psi_vec(&up) + 1 > p {
                violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && within(elapsed, 10),
        format!("{violations} violations over k in [0, 1e6] and 1e4 vectors, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let table = ["|", "0|", "1|", "10|", "11|", "100|", "101|", "110|"];
    let mismatches: Vec<u64> = (0..8u64)
        .filter(|&k| encode_int(k).to_string() != table[k as usize])
        .collect();
    let vec = encode_vec(&[3, 0, 4, 0, 1]).to_string();
    outcome(
        mismatches.is_empty() && vec == "10||11||0|",
        format!("table mismatches at {mismatches:?}; encode_vec(3,0,4,0,1) = {vec:?}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = RandomSource::new(3);
    let (mut violations, mut scaled_runs) = (0u64, 0u32);
    for i in 0..100u64 {
        let d = 1 + below(&mut rng, 16) as usize;
        let sigma = 0.05 + 0.25 * uniform(&mut rng);
        let raw: Vec<f64> = (0..d).map(|_| uniform(&mut rng).powi(3) + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let stream = generate_stream(
            &StreamSource::Categorical {
                probs,
                length: 10_000,
            },
            d,
            i,
        )
        .unwrap();
        let config = CounterConfig::new(10_000, d, sigma).unwrap();
        let (m_star, floor) = (config.m_star(), config.m_star() + 1 - 2 * d as u64);
        let mut counter = VecCounter::new(config, i);
        let mut scaled = false;
        for j in stream.iter() {
            let before = counter.state().u();
            let out = counter.increment(j).unwrap();
            let s = counter.state();
            if s.failed() {
                break;
            }
            let p = psi_vec(s.v());
            scaled |= out.scaled_up;
            violations += u64::from(p > m_star)
                + u64::from(scaled && p < floor)
                + u64::from(s.u() < before || s.u() > before + 1);
        }
        scaled_runs += u32::from(scaled);
    }
    outcome(
        violations == 0,
        format!("{violations} violations; {scaled_runs}/100 runs scaled up"),
    )
}

fn main_experiment() -> (TrialStats, Duration) {
    let spec = ExperimentSpec::new(
        Algo::VecCount,
        4,
        0.3,
        StreamSource::Categorical {
            probs: vec![0.5, 0.25, 0.125, 0.125],
            length: 10_000,
        },
        100_000,
        2024,
    );
    let start = Instant::now();
    let stats = run_trials(&spec).unwrap();
    (stats, start.elapsed())
}

fn criterion_4(stats: &TrialStats, elapsed: Duration) -> Outcome {
    let mut worst: f64 = 0.0;
    for ((m, se), x) in stats
        .mean_estimate
        .iter()
        .zip(&stats.mean_stderr)
        .zip(&stats.x)
    {
        worst = worst.max((m - *x as f64).abs() / se);
    }
    outcome(
        worst <= 4.0 && within(elapsed, 120),
        format!(
            "x = {:?}, worst |mean - x| = {worst:.2} stderr, {elapsed:.1?}",
            stats.x
        ),
    )
}

fn criterion_5(stats: &TrialStats) -> Outcome {
    let config = stats.config.as_ref().unwrap();
    let upper = stats.relative_mse + Z_999 * stats.relative_mse_stderr;
    let composite = config.mse_bound();
    outcome(
        upper <= 0.09 && upper <= composite,
        format!(
            "relative_mse = {:.6} (99.9% upper {upper:.6}) vs sigma^2 = 0.09 and 5/(6a-2)+tau = {composite:.6} at a = {}",
            stats.relative_mse,
            config.a()
        ),
    )
}

fn criterion_6(stats: &TrialStats) -> Outcome {
    let offset = stats.config.as_ref().unwrap().scale_offset();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in 1..=5 {
        let (p, se) = stats.scale_tail(r as f64 + offset);
        pass &= p <= 0.5f64.powi(r) + 4.0 * se;
        parts.push(format!("r={r}: {p}"));
    }
    outcome(
        pass,
        format!(
            "offset {offset:.3}, U histogram {:?}; {}",
            stats.u_histogram,
            parts.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1, 2] {
        let config = CounterConfig::new(200, d, 0.3).unwrap();
        match cover_audit(&config, 200, 4.0, DEFAULT_NODE_BUDGET) {
            Ok((report, reach)) => {
                pass &= report.covered && reach.complete;
                parts.push(format!(
                    "d={d}: {} points, {} estimates, worst ratio {}",
                    report.points,
                    reach.estimates.len(),
                    report.worst_ratio
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("d={d}: {e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        pass && within(elapsed, 300),
        format!("{}; {elapsed:.2?}", parts.join("; ")),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let (mut ordered, mut cells) = (0, 0);
    let (mut separated, mut separation_cells) = (0, 0);
    let mut worst_gap = i64::MIN;
    for log2_n in [10.0, 20.0, 40.0, 60.0] {
        for d in [1usize, 4, 16, 64] {
            for sigma in [0.01, 0.05, 0.1, 0.3] {
                let lower = state_space_lower_bound(log2_n, d, sigma).unwrap().bits;
                let total = SpaceBits::for_params(log2_n, d, sigma).unwrap().total;
                cells += 1;
                ordered += usize::from(lower <= total as f64);
                if d >= 4 && sigma <= 0.1 && log2_n >= 40.0 {
                    let morris =
                        d as u64 * morris_space_bits(log2_n, morris_accuracy_for_sigma(sigma));
                    let gap = total as i64 - morris as i64;
                    separation_cells += 1;
                    separated += usize::from(gap < 0);
                    worst_gap = worst_gap.max(gap);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ordered == cells && separated == separation_cells && within(elapsed, 1),
        format!(
            "lower <= implemented in {ordered}/{cells} cells; shared < d*Morris in {separated}/{separation_cells} cells \
             (largest excess {worst_gap} bits); {elapsed:.2?}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let source = StreamSource::AdversarialNaive { s: 4, a: 2, hot: 1 };
    let mut naive = ExperimentSpec::new(Algo::Naive, 64, 0.2, source.clone(), 10_000, 9);
    naive.a_naive = 2;
    let naive = run_trials(&naive).unwrap();
    let ours = run_trials(&ExperimentSpec::new(
        Algo::VecCount,
        64,
        0.2,
        source,
        10_000,
        9,
    ))
    .unwrap();
    let bound = ours.config.as_ref().unwrap().mse_bound();
    let naive_low = naive.relative_mse - 4.0 * naive.relative_mse_stderr;
    let ours_high = ours.relative_mse + Z_999 * ours.relative_mse_stderr;
    let elapsed = start.elapsed();
    outcome(
        naive_low > 0.04 && ours_high <= bound && within(elapsed, 120),
        format!(
            "naive relative RMSE {:.3} (MSE {:.4} +- {:.4}); veccount relative MSE {:.4} vs bound {bound:.4}; {elapsed:.1?}",
            naive.relative_mse.sqrt(),
            naive.relative_mse,
            naive.relative_mse_stderr,
            ours.relative_mse
        ),
    )
}

fn cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_veccount"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "veccount {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn criterion_10() -> Outcome {
    let mut rows_checked = 0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let seed_s = seed.to_string();
        let out = cli(&[
            "trace",
            "--d",
            "4",
            "--mstar",
            "12",
            "--dist",
            "0.5,0.25,0.125,0.125",
            "--seed",
            &seed_s,
            "--steps",
            "3000",
        ]);
        let mut scaled = false;
        for line in String::from_utf8(out).unwrap().lines() {
            let cols: Vec<&str> = line.split(" | ").collect();
            let nums =
                |s: &str| -> Vec<u128> { s.split(' ').map(|t| t.parse().unwrap()).collect() };
            let u: u32 = cols[0].parse().unwrap();
            let v = nums(cols[1]);
            let est = nums(cols[2]);
            let x = nums(cols[3]);
            let encoded: SymbolString = cols[4].parse().unwrap();
            let v64: Vec<u64> = v.iter().map(|&e| e as u64).collect();
            scaled |= u > 0;
            let ok = decode_vec(&encoded, 4).ok() == Some(v64.clone())
                && est.iter().zip(&v).all(|(e, v)| *e == v << u)
                && (u > 0 || v == x)
                && (!scaled || (5..=12).contains(&psi_vec(&v64)));
            if !ok {
                failures.push(format!("seed {seed}: {line}"));
            }
            rows_checked += 1;
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{rows_checked} rows over 20 seeds, {} bad {:?}",
            failures.len(),
            failures.first()
        ),
    )
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("s.txt");
    let mut text = String::from("d=3\n");
    for i in 0..5000 {
        text.push_str(&format!("{}\n", 1 + (i * 7 + i / 3) % 3));
    }
    std::fs::write(&stream, text).unwrap();
    let stream = stream.to_str().unwrap();
    let state = dir.path().join("state.bin");
    let state = state.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["run", "--stream", stream, "--sigma", "0.2", "--seed", "5"],
        vec![
            "run", "--stream", stream, "--sigma", "0.2", "--seed", "5", "--algo", "dmorris",
        ],
        vec![
            "run", "--stream", stream, "--sigma", "0.2", "--seed", "5", "--algo", "naive",
        ],
        vec![
            "run",
            "--stream",
            stream,
            "--sigma",
            "0.2",
            "--seed",
            "5",
            "--n",
            "20000",
            "--state-out",
            state,
        ],
        vec!["trace", "--seed", "4", "--steps", "500"],
        vec![
            "experiment",
            "--algo",
            "veccount",
            "--d",
            "4",
            "--sigma",
            "0.3",
            "--trials",
            "200",
            "--dist",
            "0.5,0.25,0.125,0.125",
            "--length",
            "2000",
            "--seed",
            "1",
        ],
        vec![
            "experiment",
            "--algo",
            "naive",
            "--d",
            "64",
            "--sigma",
            "0.2",
            "--trials",
            "200",
            "--adversarial",
            "4,2,1",
        ],
        vec![
            "bounds",
            "--n",
            "2^10,2^64",
            "--d",
            "1,8",
            "--sigma",
            "0.05,0.3",
        ],
        vec![
            "cover",
            "--d",
            "2",
            "--sigma",
            "0.3",
            "--max-increments",
            "60",
        ],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        if cli(args) != cli(args) {
            differing.push(args[0]);
        }
    }
    // Resuming from the saved state is also reproducible.
    let resume = ["run", "--stream", stream, "--state-in", state];
    if cli(&resume) != cli(&resume) {
        differing.push("run --state-in");
    }
    outcome(
        differing.is_empty(),
        format!(
            "{} commands run twice; differing: {differing:?}",
            commands.len() + 1
        ),
    )
}

fn main() {
    let (stats, elapsed) = main_experiment();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "encoding properties", criterion_1()),
        (2, "code table fidelity", criterion_2()),
        (3, "space invariants", criterion_3()),
        (4, "unbiasedness", criterion_4(&stats, elapsed)),
        (5, "MSE bound", criterion_5(&stats)),
        (6, "U tail", criterion_6(&stats)),
        (7, "covering audit", criterion_7()),
        (8, "bound ordering", criterion_8()),
        (9, "naive baseline failure", criterion_9()),
        (10, "trace structure", criterion_10()),
        (11, "determinism", criterion_11()),
    ];
    let mut unexpected = Vec::new();
    for (id, name, o) in &results {
        println!(
            "{} {id:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if o.pass == EXPECTED_FAIL.contains(id) {
            unexpected.push(*id);
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!(
        "{passed}/{} criteria pass; expected failures: {EXPECTED_FAIL:?}",
        results.len()
    );
    if !unexpected.is_empty() {
        println!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
