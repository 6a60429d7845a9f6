//! Input streams: generation and the on-disk formats.
//!
//! Text format: a header line `d=<d>` followed by one 1-based coordinate per
//! line. Binary format: little-endian `u32` 1-based coordinates with no
//! header; the dimension comes from the caller.

use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;

/// An input sequence of 0-based coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    d: usize,
    coords: Vec<u32>,
}

impl Stream {
    pub fn new(d: usize, coords: Vec<u32>) -> Result<Self, HarnessError> {
        if d < 1 {
            return Err(HarnessError::InvalidSpec(
                "stream dimension must be >= 1".into(),
            ));
        }
        if let Some(bad) = coords.iter().find(|&&c| c as usize >= d) {
            return Err(HarnessError::InvalidSpec(format!(
                "coordinate {} out of range for d={d}",
                bad + 1
            )));
        }
        Ok(Stream { d, coords })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.coords.iter().map(|&c| c as usize)
    }

    /// The exact count vector `x`.
    pub fn counts(&self) -> Vec<u64> {
        let mut x = vec![0u64; self.d];
        for &c in &self.coords {
            x[c as usize] += 1;
        }
        x
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("d={}\n", self.d);
        for &c in &self.coords {
            out.push_str(&(c + 1).to_string());
            out.push('\n');
        }
        out
    }

    pub fn to_binary(&self) -> Vec<u8> {
        self.coords
            .iter()
            .flat_map(|&c| (c + 1).to_le_bytes())
            .collect()
    }

    pub fn parse_text(text: &str) -> Result<Stream, HarnessError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(HarnessError::StreamFile {
            line: 1,
            msg: "missing d=<d> header".into(),
        })?;
        let d: usize = header
            .trim()
            .strip_prefix("d=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&d| d >= 1)
            .ok_or(HarnessError::StreamFile {
                line: 1,
                msg: format!("bad header {header:?}, expected d=<d>"),
            })?;
        let mut coords = Vec::new();
        for (i, line) in lines {
            let idx: usize = line.trim().parse().map_err(|_| HarnessError::StreamFile {
                line: i + 1,
                msg: format!("not a coordinate: {line:?}"),
            })?;
            if idx < 1 || idx > d {
                return Err(HarnessError::StreamFile {
                    line: i + 1,
                    msg: format!("coordinate {idx} outside [1, {d}]"),
                });
            }
            coords.push((idx - 1) as u32);
        }
        Ok(Stream { d, coords })
    }

    pub fn parse_binary(bytes: &[u8], d: usize) -> Result<Stream, HarnessError> {
        if d < 1 {
            return Err(HarnessError::InvalidSpec(
                "stream dimension must be >= 1".into(),
            ));
        }
        if !bytes.len().is_multiple_of(4) {
            return Err(HarnessError::StreamFile {
                line: bytes.len() / 4 + 1,
                msg: "binary stream length is not a multiple of 4 bytes".into(),
            });
        }
        let coords = bytes
            .chunks_exact(4)
            .enumerate()
            .map(|(i, w)| {
                let idx = u32::from_le_bytes(w.try_into().expect("4-byte chunk"));
                if idx < 1 || idx as usize > d {
                    Err(HarnessError::StreamFile {
                        line: i + 1,
                        msg: format!("coordinate {idx} outside [1, {d}]"),
                    })
                } else {
                    Ok(idx - 1)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Stream { d, coords })
    }

    pub fn read(path: &Path, binary_d: Option<usize>) -> Result<Stream, HarnessError> {
        match binary_d {
            Some(d) => Stream::parse_binary(&std::fs::read(path)?, d),
            None => Stream::parse_text(&std::fs::read_to_string(path)?),
        }
    }
}

/// Where an experiment's stream comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    /// A stream file; `binary` selects the `u32` format.
    File { path: PathBuf, binary: bool },
    /// `length` i.i.d. draws from the distribution `probs` over coordinates.
    Categorical { probs: Vec<f64>, length: usize },
    /// Stream that defeats the fixed-width shared-scale counter: the first
    /// `hot` coordinates are each incremented `2^s * a` times, then every
    /// remaining coordinate once.
    AdversarialNaive { s: u32, a: u64, hot: usize },
}

/// Builds the stream described by `source`. Random sources use ChaCha8
/// keyed by `seed` on stream 1, so they never share bits with a counter
/// seeded by the same value.
pub fn generate_stream(source: &StreamSource, d: usize, seed: u64) -> Result<Stream, HarnessError> {
    match source {
        StreamSource::File { path, binary } => {
            let stream = Stream::read(path, binary.then_some(d))?;
            if stream.d != d {
                return Err(HarnessError::InvalidSpec(format!(
                    "stream file has d={} but the experiment uses d={d}",
                    stream.d
                )));
            }
            Ok(stream)
        }
        StreamSource::Categorical { probs, length } => {
            check_distribution(probs, d)?;
            let dist = WeightedIndex::new(probs)
                .map_err(|e| HarnessError::InvalidSpec(format!("bad distribution: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let coords = (0..*length).map(|_| dist.sample(&mut rng) as u32).collect();
            Stream::new(d, coords)
        }
        StreamSource::AdversarialNaive { s, a, hot } => {
            if *hot < 1 || *hot > d || *a < 1 || *s > 40 {
                return Err(HarnessError::InvalidSpec(format!(
                    "adversarial stream needs 1 <= hot <= d, a >= 1, s <= 40 (got hot={hot}, a={a}, s={s})"
                )));
            }
            let per_hot = (1u64 << s) * a;
            let mut coords = Vec::with_capacity(per_hot as usize * hot + (d - hot));
            for _ in 0..per_hot {
                coords.extend(0..*hot as u32);
            }
            coords.extend(*hot as u32..d as u32);
            Stream::new(d, coords)
        }
    }
}

pub(crate) fn check_distribution(probs: &[f64], d: usize) -> Result<(), HarnessError> {
    if probs.len() != d {
        return Err(HarnessError::InvalidSpec(format!(
            "distribution has {} entries but d={d}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(HarnessError::InvalidSpec(
            "probabilities must be finite and >= 0".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(HarnessError::InvalidSpec(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}
