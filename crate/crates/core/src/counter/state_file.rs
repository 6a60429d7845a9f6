//! Binary snapshot of a counter.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "VCNT"                       magic
//! u16                          version (1)
//! u64 n, u64 d, f64 sigma, u64 a, u64 m_star, u64 u_star,
//! u64 trigger (0 strict, 1 inclusive), u64 deterministic_mode
//! u64 U, u64 d, d x u64 V
//! u8 flags                     bit 0 failed, bit 1 exact counts follow
//! [d x u64 exact]
//! u64 increments consumed
//! u64 seed, [u8; 32] chacha key, u64 stream, u128 word position,
//! u64 bit buffer, u8 buffered bit count, u64 bits consumed
//! u32 CRC-32 of everything above
//! ```

use super::{CounterConfig, CounterError, CounterState, Trigger, VecCounter};
use crate::randomness::{RandomSnapshot, RandomSource};
use crate::varint::psi_vec;

const MAGIC: &[u8; 4] = b"VCNT";
const VERSION: u16 = 1;

const FLAG_FAILED: u8 = 1;
const FLAG_EXACT: u8 = 2;

fn corrupt(msg: impl Into<String>) -> CounterError {
    CounterError::CorruptState(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], CounterError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| corrupt("truncated state"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CounterError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, CounterError> {
        Ok(self.array::<1>()?[0])
    }

    fn u64(&mut self) -> Result<u64, CounterError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, CounterError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn u128(&mut self) -> Result<u128, CounterError> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    fn vec(&mut self, len: usize) -> Result<Vec<u64>, CounterError> {
        (0..len).map(|_| self.u64()).collect()
    }
}

impl VecCounter {
    pub fn serialize(&self) -> Vec<u8> {
        let c = &self.config;
        let s = &self.state;
        let mut out = Vec::with_capacity(160 + 16 * c.d);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for field in [c.n, c.d as u64] {
            out.extend_from_slice(&field.to_le_bytes());
        }
        out.extend_from_slice(&c.sigma.to_le_bytes());
        for field in [
            c.a,
            c.m_star,
            c.u_star,
            c.trigger.code(),
            u64::from(c.deterministic_mode),
        ] {
            out.extend_from_slice(&field.to_le_bytes());
        }

        out.extend_from_slice(&s.u.to_le_bytes());
        out.extend_from_slice(&(c.d as u64).to_le_bytes());
        for v in &s.v {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut flags = 0;
        if s.failed {
            flags |= FLAG_FAILED;
        }
        if s.exact.is_some() {
            flags |= FLAG_EXACT;
        }
        out.push(flags);
        if let Some(exact) = &s.exact {
            for x in exact {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.increments.to_le_bytes());

        let r = self.rng.snapshot();
        out.extend_from_slice(&r.seed.to_le_bytes());
        out.extend_from_slice(&r.chacha_seed);
        out.extend_from_slice(&r.stream.to_le_bytes());
        out.extend_from_slice(&r.word_pos.to_le_bytes());
        out.extend_from_slice(&r.buffer.to_le_bytes());
        out.push(r.buffered as u8);
        out.extend_from_slice(&r.bits_consumed.to_le_bytes());

        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<VecCounter, CounterError> {
        if bytes.len() < 4 + 2 + 4 {
            return Err(corrupt("truncated state"));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body).to_le_bytes() != crc {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if &r.array::<4>()? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }

        let n = r.u64()?;
        let d = r.u64()?;
        let sigma = r.f64()?;
        let a = r.u64()?;
        let m_star = r.u64()?;
        let u_star = r.u64()?;
        let trigger = Trigger::from_code(r.u64()?).ok_or_else(|| corrupt("bad trigger"))?;
        let deterministic_mode = match r.u64()? {
            0 => false,
            1 => true,
            _ => return Err(corrupt("bad mode flag")),
        };
        if n == 0 || d == 0 || d > (body.len() as u64) / 8 || u_star == 0 || m_star < 3 * d {
            return Err(corrupt("inconsistent configuration"));
        }
        let d = d as usize;
        let config = CounterConfig {
            n,
            d,
            sigma,
            a,
            m_star,
            u_star,
            trigger,
            deterministic_mode,
        };

        let u = r.u64()?;
        if r.u64()? != d as u64 {
            return Err(corrupt("dimension mismatch"));
        }
        let v = r.vec(d)?;
        let flags = r.u8()?;
        if flags & !(FLAG_FAILED | FLAG_EXACT) != 0 {
            return Err(corrupt("unknown flags"));
        }
        let failed = flags & FLAG_FAILED != 0;
        let exact = if flags & FLAG_EXACT != 0 {
            Some(r.vec(d)?)
        } else {
            None
        };
        if exact.is_some() != deterministic_mode {
            return Err(corrupt("exact counts do not match mode"));
        }
        let increments = r.u64()?;

        let snapshot = RandomSnapshot {
            seed: r.u64()?,
            chacha_seed: r.array()?,
            stream: r.u64()?,
            word_pos: r.u128()?,
            buffer: r.u64()?,
            buffered: u32::from(r.u8()?),
            bits_consumed: r.u64()?,
        };
        if snapshot.buffered > 64 {
            return Err(corrupt("bad bit buffer"));
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }

        let psi_total = psi_vec(&v);
        if psi_total > m_star || (failed && u != u_star) || u > u_star || increments > n {
            return Err(corrupt("state violates counter invariants"));
        }
        Ok(VecCounter {
            config,
            state: CounterState {
                u,
                v,
                failed,
                exact,
            },
            rng: RandomSource::restore(&snapshot),
            increments,
            psi_total,
        })
    }
}
