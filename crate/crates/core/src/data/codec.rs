//! Little-endian byte reader/writer shared by the on-disk formats.
//!
//! Every read reports the absolute byte offset at which it failed.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic at byte {offset}: expected {expected:?}, found {found:?}")]
    BadMagic {
        offset: usize,
        expected: [u8; 4],
        found: [u8; 4],
    },
    #[error("unsupported version {found} at byte {offset}")]
    UnsupportedVersion { offset: usize, found: u16 },
    #[error("invalid {what} {found} at byte {offset}")]
    InvalidDimension {
        offset: usize,
        what: &'static str,
        found: u64,
    },
    #[error(
        "truncated payload at byte {offset}: needed {needed} more bytes, {available} available"
    )]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("invalid {what} code {code} at byte {offset}")]
    InvalidCode {
        offset: usize,
        what: &'static str,
        code: u32,
    },
    #[error("invalid utf-8 string at byte {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("non-finite value at byte {offset}")]
    NonFinite { offset: usize },
    #[error("{count} unexpected trailing bytes at byte {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let offset = self.pos;
        let found: [u8; 4] = self.take(4)?.try_into().expect("4 bytes");
        if &found != expected {
            return Err(FormatError::BadMagic {
                offset,
                expected: *expected,
                found,
            });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u16) -> Result<u16, FormatError> {
        let offset = self.pos;
        let v = self.u16()?;
        if v != supported {
            return Err(FormatError::UnsupportedVersion { offset, found: v });
        }
        Ok(v)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    /// Reads a positive `u32` dimension.
    pub fn dim(&mut self, what: &'static str) -> Result<usize, FormatError> {
        let offset = self.pos;
        let v = self.u32()?;
        if v == 0 {
            return Err(FormatError::InvalidDimension {
                offset,
                what,
                found: 0,
            });
        }
        Ok(v as usize)
    }

    /// Reads one finite `f32`, widened to `f64`.
    pub fn f32(&mut self) -> Result<f64, FormatError> {
        let offset = self.pos;
        let v = f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(FormatError::NonFinite { offset });
        }
        Ok(f64::from(v))
    }

    pub fn f32_into(&mut self, out: &mut Vec<f64>, n: usize) -> Result<(), FormatError> {
        // Fail fast on truncation before touching any element.
        if self.remaining() < n.saturating_mul(4) {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n * 4,
                available: self.remaining(),
            });
        }
        out.reserve(n);
        for _ in 0..n {
            out.push(self.f32()?);
        }
        Ok(())
    }

    pub fn string(&mut self) -> Result<String, FormatError> {
        let len = self.u32()? as usize;
        let offset = self.pos;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| FormatError::InvalidUtf8 { offset })
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::TrailingBytes {
                offset: self.pos,
                count: self.remaining(),
            });
        }
        Ok(())
    }
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f64) {
        self.buf.extend_from_slice(&(v as f32).to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f32(v);
        }
    }

    pub fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

/// Rounds to the nearest `f32`, the precision every file format stores.
pub fn round_f32(v: f64) -> f64 {
    f64::from(v as f32)
}
