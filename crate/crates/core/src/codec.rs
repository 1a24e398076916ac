//! Little-endian binary codec used by every serializable sketch.
//!
//! Each top-level blob starts with the 4-byte magic `FPSK`, a `u16` format
//! version and a one-byte kind tag. Field elements are written as 8-byte
//! little-endian words, vectors are prefixed by a `u32` length.

use crate::error::{Result, SketchError};
use crate::field::{Fp, Modulus};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"FPSK";
pub const VERSION: u16 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    PolyHash = 1,
    UniformOnSet = 2,
    Gme = 3,
    Light = 4,
    HighEnd = 5,
    FpEstBox = 6,
    FpHh = 7,
    Fingerprint = 8,
    Instance = 9,
    CountSketch = 10,
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_header(kind: Kind) -> Self {
        let mut w = Self::new();
        w.buf.extend_from_slice(MAGIC);
        w.u16(VERSION);
        w.u8(kind as u8);
        w
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

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i128(&mut self, v: i128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }

    pub fn field<M: Modulus>(&mut self, v: Fp<M>) {
        self.u64(v.value());
    }

    pub fn fields<M: Modulus>(&mut self, vs: &[Fp<M>]) {
        self.len(vs.len());
        for &v in vs {
            self.field(v);
        }
    }

    pub fn scalars<S: Scalar>(&mut self, vs: &[S]) {
        self.u8(S::TAG);
        self.len(vs.len());
        for &v in vs {
            v.write_le(&mut self.buf);
        }
    }

    pub fn i64s(&mut self, vs: &[i64]) {
        self.len(vs.len());
        for &v in vs {
            self.i64(v);
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn short() -> SketchError {
    SketchError::Codec("unexpected end of input".into())
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    /// Opens a blob and checks magic, version and kind.
    pub fn with_header(buf: &'a [u8], kind: Kind) -> Result<Self> {
        let mut r = Self::new(buf);
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(SketchError::Codec("bad magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(SketchError::Codec(format!("unsupported version {version}")));
        }
        let k = r.u8()?;
        if k != kind as u8 {
            return Err(SketchError::Codec(format!("expected kind {}, found {k}", kind as u8)));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(short)?;
        let s = self.buf.get(self.pos..end).ok_or_else(short)?;
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i128(&mut self) -> Result<i128> {
        Ok(i128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn len(&mut self) -> Result<usize> {
        let n = self.u32()? as usize;
        // Every element is at least one byte; reject lengths the input cannot hold.
        if n > self.buf.len() - self.pos {
            return Err(SketchError::Codec(format!("length {n} exceeds remaining input")));
        }
        Ok(n)
    }

    pub fn field<M: Modulus>(&mut self) -> Result<Fp<M>> {
        let v = self.u64()?;
        if v >= M::P {
            return Err(SketchError::Codec(format!("field element {v} out of range")));
        }
        Ok(Fp::from_canonical(v))
    }

    pub fn fields<M: Modulus>(&mut self) -> Result<Vec<Fp<M>>> {
        let n = self.len()?;
        (0..n).map(|_| self.field()).collect()
    }

    pub fn scalars<S: Scalar>(&mut self) -> Result<Vec<S>> {
        let tag = self.u8()?;
        if tag != S::TAG {
            return Err(SketchError::Codec(format!("scalar tag {tag}, expected {}", S::TAG)));
        }
        let n = self.len()?;
        let raw = self.take(n.checked_mul(S::BYTES).ok_or_else(short)?)?;
        Ok(raw.chunks_exact(S::BYTES).map(S::read_le).collect())
    }

    pub fn i64s(&mut self) -> Result<Vec<i64>> {
        let n = self.len()?;
        (0..n).map(|_| self.i64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(SketchError::Codec(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
