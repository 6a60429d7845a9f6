//! Ternary variable-length integer code over the alphabet `{0, 1, |}`.
//!
//! `0` is written as `|`, `1` as `0|`, and every `k >= 2` as the binary
//! representation of `k - 1` followed by the separator:
//!
//! | k | code   | k | code   |
//! |---|--------|---|--------|
//! | 0 | `\|`   | 4 | `11\|`  |
//! | 1 | `0\|`  | 5 | `100\|` |
//! | 2 | `1\|`  | 6 | `101\|` |
//! | 3 | `10\|` | 7 | `110\|` |
//!
//! A vector is the concatenation of its entries' codes. The counter never
//! materializes these strings on the hot path; it only needs the length
//! function [`psi`], which is computed arithmetically.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VarintError {
    #[error("malformed code at symbol {offset}: {reason}")]
    MalformedCode { offset: usize, reason: &'static str },
    #[error("expected {expected} codes, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("encoded value at symbol {offset} does not fit in 64 bits")]
    Overflow { offset: usize },
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(char),
}

/// One letter of the ternary alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Zero,
    One,
    Sep,
}

impl Symbol {
    /// Digit value used by the radix-3 packer.
    pub fn digit(self) -> u8 {
        match self {
            Symbol::Zero => 0,
            Symbol::One => 1,
            Symbol::Sep => 2,
        }
    }

    pub fn from_digit(digit: u8) -> Option<Symbol> {
        match digit {
            0 => Some(Symbol::Zero),
            1 => Some(Symbol::One),
            2 => Some(Symbol::Sep),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Zero => '0',
            Symbol::One => '1',
            Symbol::Sep => '|',
        }
    }
}

impl TryFrom<char> for Symbol {
    type Error = VarintError;

    fn try_from(c: char) -> Result<Self, Self::Error> {
        match c {
            '0' => Ok(Symbol::Zero),
            '1' => Ok(Symbol::One),
            '|' => Ok(Symbol::Sep),
            other => Err(VarintError::InvalidSymbol(other)),
        }
    }
}

/// A sequence of symbols. Renders as text using `0`, `1` and `|`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SymbolString(Vec<Symbol>);

impl SymbolString {
    pub fn new() -> Self {
        SymbolString(Vec::new())
    }

    pub fn from_symbols(symbols: Vec<Symbol>) -> Self {
        SymbolString(symbols)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, symbol: Symbol) {
        self.0.push(symbol);
    }

    pub fn extend_from(&mut self, other: &SymbolString) {
        self.0.extend_from_slice(&other.0);
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for SymbolString {
    type Err = VarintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(Symbol::try_from)
            .collect::<Result<Vec<_>, _>>()
            .map(SymbolString)
    }
}

/// Code length of `k` in symbols.
#[inline]
pub fn psi(k: u64) -> u64 {
    match k {
        0 => 1,
        1 => 2,
        // 2 + floor(log2(k - 1))
        _ => 2 + u64::from(63 - (k - 1).leading_zeros()),
    }
}

/// Total code length of a vector.
pub fn psi_vec(v: &[u64]) -> u64 {
    v.iter().map(|&k| psi(k)).sum()
}

fn push_int(out: &mut Vec<Symbol>, k: u64) {
    match k {
        0 => {}
        1 => out.push(Symbol::Zero),
        _ => {
            let body = k - 1;
            let width = 64 - body.leading_zeros();
            for bit in (0..width).rev() {
                out.push(if (body >> bit) & 1 == 1 {
                    Symbol::One
                } else {
                    Symbol::Zero
                });
            }
        }
    }
    out.push(Symbol::Sep);
}

pub fn encode_int(k: u64) -> SymbolString {
    let mut out = Vec::with_capacity(psi(k) as usize);
    push_int(&mut out, k);
    SymbolString(out)
}

pub fn encode_vec(v: &[u64]) -> SymbolString {
    let mut out = Vec::with_capacity(psi_vec(v) as usize);
    for &k in v {
        push_int(&mut out, k);
    }
    SymbolString(out)
}

/// Decodes one scalar code starting at `offset`. Returns the value and the
/// number of symbols consumed.
pub fn decode_int(s: &SymbolString, offset: usize) -> Result<(u64, usize), VarintError> {
    let symbols = s.symbols();
    if offset > symbols.len() {
        return Err(VarintError::MalformedCode {
            offset,
            reason: "offset past end of string",
        });
    }
    let sep = symbols[offset..]
        .iter()
        .position(|&c| c == Symbol::Sep)
        .ok_or(VarintError::MalformedCode {
            offset,
            reason: "no separator before end of string",
        })?;
    let body = &symbols[offset..offset + sep];
    let value = match body {
        [] => 0,
        [Symbol::Zero] => 1,
        [Symbol::Zero, ..] => {
            return Err(VarintError::MalformedCode {
                offset,
                reason: "leading zero in binary part",
            })
        }
        _ => {
            if body.len() > 64 {
                return Err(VarintError::Overflow { offset });
            }
            let bits = body
                .iter()
                .fold(0u64, |acc, &c| (acc << 1) | u64::from(c == Symbol::One));
            bits.checked_add(1)
                .ok_or(VarintError::Overflow { offset })?
        }
    };
    Ok((value, sep + 1))
}

/// Decodes a concatenation of exactly `d` scalar codes.
pub fn decode_vec(s: &SymbolString, d: usize) -> Result<Vec<u64>, VarintError> {
    let mut out = Vec::with_capacity(d);
    let mut offset = 0;
    while offset < s.len() {
        let (k, used) = decode_int(s, offset)?;
        out.push(k);
        offset += used;
    }
    if out.len() != d {
        return Err(VarintError::ArityMismatch {
            expected: d,
            found: out.len(),
        });
    }
    Ok(out)
}

/// Number of bits needed to store `m` ternary symbols: the smallest `b`
/// with `2^b >= 3^m`, i.e. `ceil(m * log2 3)`.
pub fn packed_bit_len(m: u64) -> u64 {
    if m == 0 {
        return 0;
    }
    let max = BigUint::from(3u32).pow(m as u32) - 1u32;
    max.bits()
}

/// A symbol string packed as a base-3 numeral.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedSymbols {
    /// Number of symbols; leading `0` symbols are otherwise ambiguous.
    pub symbols: usize,
    /// Payload width in bits, always `packed_bit_len(symbols)`.
    pub bit_len: u64,
    /// Little-endian payload bytes, `ceil(bit_len / 8)` of them.
    pub payload: Vec<u8>,
}

/// Packs `s` as a radix-3 numeral, first symbol most significant.
pub fn pack_bits(s: &SymbolString) -> PackedSymbols {
    let mut value = BigUint::default();
    for c in s.symbols() {
        value = value * 3u32 + u32::from(c.digit());
    }
    let bit_len = packed_bit_len(s.len() as u64);
    let mut payload = value.to_bytes_le();
    let width = bit_len.div_ceil(8) as usize;
    if payload == [0] && width == 0 {
        payload.clear();
    }
    payload.resize(width, 0);
    PackedSymbols {
        symbols: s.len(),
        bit_len,
        payload,
    }
}

pub fn unpack_bits(packed: &PackedSymbols) -> SymbolString {
    let mut value = BigUint::from_bytes_le(&packed.payload);
    let mut digits = vec![Symbol::Zero; packed.symbols];
    for slot in digits.iter_mut().rev() {
        let digit = (&value % 3u32)
            .to_u32_digits()
            .first()
            .copied()
            .unwrap_or(0);
        *slot = Symbol::from_digit(digit as u8).expect("remainder mod 3");
        value /= 3u32;
    }
    SymbolString(digits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(text: &str) -> SymbolString {
        text.parse().unwrap()
    }

    #[test]
    fn code_table() {
        let table = ["|", "0|", "1|", "10|", "11|", "100|", "101|", "110|"];
        for (k, code) in table.iter().enumerate() {
            assert_eq!(encode_int(k as u64).to_string(), *code, "k={k}");
        }
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(0), 1);
        assert_eq!(psi(7), 4);
        assert_eq!(psi(2), 2);
        assert_eq!(psi(u64::MAX), 65);
    }

    #[test]
    fn vector_examples() {
        assert_eq!(encode_vec(&[3, 0, 4, 0, 1]).to_string(), "10||11||0|");
        assert_eq!(encode_vec(&[0, 0]).to_string(), "||");
        assert_eq!(encode_vec(&[6, 4, 2, 2]).to_string(), "101|11|1|1|");
        assert_eq!(psi_vec(&[3, 0, 4, 0, 1]), 10);
        assert_eq!(psi_vec(&[0; 9]), 9);
        assert_eq!(psi_vec(&[6, 5, 2, 2]), 12);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_int(&s("|"), 0), Ok((0, 1)));
        assert_eq!(decode_int(&s("100|"), 0), Ok((5, 4)));
        // Walk the five codes of "10||11||0|"; the second starts at symbol 3.
        assert_eq!(decode_int(&s("10||11||0|"), 3), Ok((0, 1)));
        assert_eq!(decode_vec(&s("10||11||0|"), 5), Ok(vec![3, 0, 4, 0, 1]));
        assert_eq!(decode_vec(&s("||"), 2), Ok(vec![0, 0]));
        assert_eq!(decode_vec(&s("110|11|10||"), 4), Ok(vec![7, 4, 3, 0]));
    }

    #[test]
    fn decode_errors() {
        assert!(matches!(
            decode_int(&s("101"), 0),
            Err(VarintError::MalformedCode { .. })
        ));
        assert!(matches!(
            decode_int(&s("01|"), 0),
            Err(VarintError::MalformedCode { .. })
        ));
        assert!(matches!(
            decode_vec(&s("|||"), 2),
            Err(VarintError::ArityMismatch { expected: 2, .. })
        ));
        assert!(matches!(
            decode_vec(&s("||"), 3),
            Err(VarintError::ArityMismatch {
                expected: 3,
                found: 2
            })
        ));
        // 2^64 - 1 is the largest value; its code is 64 ones.
        let max = encode_int(u64::MAX);
        assert_eq!(decode_int(&max, 0), Ok((u64::MAX, 65)));
        let too_big: SymbolString = format!("1{}|", "0".repeat(64)).parse().unwrap();
        assert!(matches!(
            decode_int(&too_big, 0),
            Err(VarintError::Overflow { .. })
        ));
        assert!(matches!(
            "10x|".parse::<SymbolString>(),
            Err(VarintError::InvalidSymbol('x'))
        ));
    }

    #[test]
    fn psi_agrees_with_encoding() {
        for k in (0..5000).chain([u64::MAX - 1, u64::MAX, 1 << 40, (1 << 40) + 1]) {
            assert_eq!(encode_int(k).len() as u64, psi(k), "k={k}");
        }
    }

    #[test]
    fn packed_lengths() {
        assert_eq!(packed_bit_len(0), 0);
        assert_eq!(packed_bit_len(1), 2);
        assert_eq!(packed_bit_len(12), 20);
        for m in 1..200u64 {
            assert_eq!(
                packed_bit_len(m),
                (m as f64 * 3f64.log2()).ceil() as u64,
                "m={m}"
            );
        }
    }

    #[test]
    fn pack_examples() {
        let empty = pack_bits(&SymbolString::new());
        assert_eq!(empty.symbols, 0);
        assert!(empty.payload.is_empty());
        assert_eq!(unpack_bits(&empty), SymbolString::new());

        let sep = pack_bits(&s("|"));
        assert_eq!(sep.bit_len, 2);
        assert_eq!(sep.payload, vec![2]);
        assert_eq!(unpack_bits(&sep), s("|"));
    }

    #[test]
    fn pack_round_trip_random_12_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let symbols: Vec<Symbol> = (0..12)
                .map(|_| Symbol::from_digit(rng.random_range(0..3)).unwrap())
                .collect();
            let text = SymbolString::from_symbols(symbols);
            let packed = pack_bits(&text);
            assert_eq!(packed.bit_len, 20);
            assert!(packed.payload.len() <= 3);
            assert_eq!(unpack_bits(&packed), text);
        }
    }
}
