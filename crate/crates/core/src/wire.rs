//! Minimal binary codec shared by proofs, protocol frames and blocks.
//!
//! Integers are little-endian. Group elements use the fixed-length canonical
//! encodings of the active [`Group`]; variable-length data (byte strings,
//! lists) carry a `u32` length or element-count prefix.

use thiserror::Error;

use crate::group::{Group, GroupError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("unexpected end of input: needed {needed} bytes, {left} left")]
    Truncated { needed: usize, left: usize },
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("unknown tag {tag:#04x} for {what}")]
    UnknownTag { what: &'static str, tag: u8 },
    #[error("invalid utf-8 string")]
    Utf8,
    #[error("length {0} exceeds limit")]
    TooLong(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Upper bound on any single length prefix; rejects absurd allocations on
/// corrupted input.
const MAX_LEN: usize = 1 << 28;

#[derive(Debug, Default, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn len(&mut self, n: usize) -> &mut Self {
        self.u32(n as u32)
    }

    /// Length-prefixed bytes.
    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.len(b.len());
        self.buf.extend_from_slice(b);
        self
    }

    /// Bytes written as-is, no prefix.
    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn scalar<G: Group>(&mut self, s: &G::Scalar) -> &mut Self {
        self.raw(&G::encode_scalar(s))
    }

    pub fn point<G: Group>(&mut self, p: &G::Point) -> &mut Self {
        self.raw(&G::encode_point(p))
    }

    pub fn points<G: Group>(&mut self, ps: &[G::Point]) -> &mut Self {
        self.len(ps.len());
        for p in ps {
            self.point::<G>(p);
        }
        self
    }

    pub fn scalars<G: Group>(&mut self, ss: &[G::Scalar]) -> &mut Self {
        self.len(ss.len());
        for s in ss {
            self.scalar::<G>(s);
        }
        self
    }

    pub fn g2<G: Group>(&mut self, p: &G::G2) -> &mut Self {
        self.raw(&G::encode_g2(p))
    }

    pub fn target<G: Group>(&mut self, t: &G::Target) -> &mut Self {
        self.raw(&G::encode_target(t))
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len()
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(WireError::Trailing(self.buf.len()))
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated {
                needed: n,
                left: self.buf.len(),
            });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, WireError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn len(&mut self) -> Result<usize, WireError> {
        let n = self.u32()? as usize;
        if n > MAX_LEN {
            return Err(WireError::TooLong(n));
        }
        Ok(n)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.len()?;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String, WireError> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| WireError::Utf8)
    }

    pub fn scalar<G: Group>(&mut self) -> Result<G::Scalar, WireError> {
        Ok(G::decode_scalar(self.take(G::SCALAR_LEN)?)?)
    }

    pub fn point<G: Group>(&mut self) -> Result<G::Point, WireError> {
        Ok(G::decode_point(self.take(G::POINT_LEN)?)?)
    }

    /// Count-prefixed list. The count is checked against the bytes left so a
    /// corrupted prefix cannot trigger a large allocation.
    pub fn points<G: Group>(&mut self) -> Result<Vec<G::Point>, WireError> {
        let n = self.count(G::POINT_LEN)?;
        (0..n).map(|_| self.point::<G>()).collect()
    }

    pub fn scalars<G: Group>(&mut self) -> Result<Vec<G::Scalar>, WireError> {
        let n = self.count(G::SCALAR_LEN)?;
        (0..n).map(|_| self.scalar::<G>()).collect()
    }

    pub fn g2<G: Group>(&mut self) -> Result<G::G2, WireError> {
        Ok(G::decode_g2(self.take(G::G2_LEN)?)?)
    }

    pub fn target<G: Group>(&mut self) -> Result<G::Target, WireError> {
        Ok(G::decode_target(self.take(G::TARGET_LEN)?)?)
    }

    /// Reads an element count for items of at least `min_size` bytes.
    pub fn count(&mut self, min_size: usize) -> Result<usize, WireError> {
        let n = self.len()?;
        let needed = n.saturating_mul(min_size.max(1));
        if needed > self.buf.len() {
            return Err(WireError::Truncated {
                needed,
                left: self.buf.len(),
            });
        }
        Ok(n)
    }
}

/// Types with a canonical binary encoding.
pub trait Encode {
    fn encode(&self, w: &mut Writer);

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.into_bytes()
    }
}

pub trait Decode: Sized {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError>;

    /// Decodes a complete buffer, rejecting trailing bytes.
    fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}
