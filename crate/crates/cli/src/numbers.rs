use std::fmt;

use crate::Fail;

/// A stream length given as an integer or as `2^k` (which may exceed u64).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NValue {
    Exact(u64),
    Pow2(u32),
}

impl NValue {
    pub fn log2(&self) -> f64 {
        match *self {
            NValue::Exact(n) => (n as f64).log2(),
            NValue::Pow2(k) => k as f64,
        }
    }

    pub fn exact(&self) -> Option<u64> {
        match *self {
            NValue::Exact(n) => Some(n),
            NValue::Pow2(k) => 1u64.checked_shl(k),
        }
    }
}

impl fmt::Display for NValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NValue::Exact(n) => write!(f, "{n}"),
            NValue::Pow2(k) => write!(f, "2^{k}"),
        }
    }
}

pub fn parse_n(s: &str) -> Option<NValue> {
    match s.strip_prefix("2^") {
        Some(k) => k.parse().ok().map(NValue::Pow2),
        None => s.parse().ok().filter(|&n| n >= 1).map(NValue::Exact),
    }
}

/// Parses a comma-separated list, rejecting empty lists and bad items.
pub fn parse_list<T>(
    s: &str,
    flag: &str,
    item: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, Fail> {
    let values = s
        .split(',')
        .map(|part| {
            let part = part.trim();
            item(part).ok_or_else(|| Fail::param(format!("{flag}: cannot parse {part:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(Fail::param(format!("{flag}: empty list")));
    }
    Ok(values)
}
