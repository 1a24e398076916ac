//! Hash families: k-wise independent polynomials over a prime field, the
//! derived ±1 sign hashes, and the uniform-on-set family.
//!
//! A seed of `k` coefficients describes a uniformly random polynomial of
//! degree `k - 1`; on any `k` distinct keys its values are independent and
//! uniform over the field. Outputs are reduced to `[0, range)` by `mod range`,
//! which biases each bucket by at most `range / q` (below `2^-31` for every
//! range under `2^30` over `q = 2^61 - 1`).

use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::error::{invalid, Result, SketchError};
use crate::field::{Fp, Modulus, M61, MERSENNE_61};
use crate::polyeval::{self, ProductTree};

/// Largest supported independence parameter.
pub const MAX_K: usize = 1 << 20;

/// Coefficients of a random polynomial plus the output range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyHashSeed<M: Modulus = M61> {
    coeffs: Vec<Fp<M>>,
    range: u64,
}

impl<M: Modulus> PolyHashSeed<M> {
    /// Draws a seed for a `k`-wise independent family into `[0, range)`.
    pub fn random<R: Rng + ?Sized>(k: usize, range: u64, rng: &mut R) -> Result<Self> {
        let coeffs = (0..k).map(|_| Fp::from_canonical(rng.gen_range(0..M::P))).collect();
        Self::from_coeffs(coeffs, range)
    }

    /// Builds a seed from explicit coefficients, constant term first.
    pub fn from_coeffs(coeffs: Vec<Fp<M>>, range: u64) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("k must be at least 1");
        }
        if coeffs.len() > MAX_K {
            return invalid(format!("k = {} exceeds {MAX_K}", coeffs.len()));
        }
        if range == 0 {
            return invalid("range must be at least 1");
        }
        Ok(Self { coeffs, range })
    }

    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn coeffs(&self) -> &[Fp<M>] {
        &self.coeffs
    }

    /// Polynomial value at `x` as a field element (Horner).
    #[inline]
    pub fn eval_field(&self, x: u64) -> Fp<M> {
        debug_assert!(x < M::P, "key outside the field");
        if M::P == MERSENNE_61 {
            let mut acc = 0;
            for c in self.coeffs.iter().rev() {
                acc = m61_step(acc, x, c.value());
            }
            return Fp::from_canonical(m61_finish(acc));
        }
        horner(&self.coeffs, Fp::from_canonical(x))
    }

    /// Polynomial value at `x`, reduced to `[0, range)`.
    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        self.eval_field(x).value() % self.range
    }

    /// `±1` from the parity of the field output.
    #[inline]
    pub fn sign(&self, x: u64) -> i64 {
        if self.eval_field(x).value() & 1 == 0 {
            1
        } else {
            -1
        }
    }

    /// Field values at many keys; four Horner chains run interleaved.
    pub fn eval_field_many(&self, xs: &[u64], out: &mut Vec<Fp<M>>) {
        out.clear();
        out.reserve(xs.len());
        let mut chunks = xs.chunks_exact(4);
        if M::P == MERSENNE_61 {
            for c in &mut chunks {
                let mut acc = [0u64; 4];
                for k in self.coeffs.iter().rev() {
                    for j in 0..4 {
                        acc[j] = m61_step(acc[j], c[j], k.value());
                    }
                }
                out.extend(acc.map(|a| Fp::from_canonical(m61_finish(a))));
            }
        }
        for c in &mut chunks {
            let x = [c[0], c[1], c[2], c[3]].map(Fp::<M>::from_canonical);
            let mut acc = [Fp::from_canonical(0); 4];
            for &k in self.coeffs.iter().rev() {
                for j in 0..4 {
                    acc[j] = acc[j] * x[j] + k;
                }
            }
            out.extend_from_slice(&acc);
        }
        for &x in chunks.remainder() {
            out.push(self.eval_field(x));
        }
    }

    /// Values at many keys via the product-tree path; identical to [`Self::eval`].
    pub fn eval_batch(&self, tree: &ProductTree<M>) -> Vec<u64> {
        polyeval::multipoint_eval(&self.coeffs, tree)
            .into_iter()
            .map(|v| v.value() % self.range)
            .collect()
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.u64(M::P);
        w.u64(self.range);
        w.fields(&self.coeffs);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let p = r.u64()?;
        if p != M::P {
            return Err(SketchError::Codec(format!("seed modulus {p} does not match {}", M::P)));
        }
        let range = r.u64()?;
        let coeffs = r.fields()?;
        Self::from_coeffs(coeffs, range).map_err(|e| SketchError::Codec(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::PolyHash);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::PolyHash)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

/// One Horner step `acc * x + c` modulo `2^61 - 1` without the final
/// conditional subtraction. Keeps `acc < 2^61 + 4` for `x, c < 2^61`.
#[inline(always)]
fn m61_step(acc: u64, x: u64, c: u64) -> u64 {
    let t = acc as u128 * x as u128;
    let s = ((t as u64) & MERSENNE_61) + (t >> 61) as u64 + c;
    (s & MERSENNE_61) + (s >> 61)
}

#[inline(always)]
fn m61_finish(acc: u64) -> u64 {
    if acc >= MERSENNE_61 { acc - MERSENNE_61 } else { acc }
}

/// Reduces a 128-bit value modulo `2^61 - 1`.
#[inline(always)]
fn m61_reduce128(v: u128) -> u64 {
    let s = (v as u64 & MERSENNE_61) + ((v >> 61) as u64 & MERSENNE_61) + (v >> 122) as u64;
    m61_finish((s & MERSENNE_61) + (s >> 61))
}

/// Powers `x^0 .. x^{k-1}` of a fixed key set over `2^61 - 1`.
///
/// Evaluating many polynomials at the same keys then costs one independent
/// dot product per key instead of a dependent Horner chain.
#[derive(Clone, Debug)]
pub struct PowerTable {
    k: usize,
    keys: Vec<u64>,
    powers: Vec<u64>,
}

impl PowerTable {
    pub fn new(keys: &[u64], k: usize) -> Self {
        let mut powers = Vec::with_capacity(keys.len() * k);
        for &x in keys {
            let x = Fp::<M61>::new(x);
            let mut v = Fp::<M61>::from_canonical(1);
            for _ in 0..k {
                powers.push(v.value());
                v *= x;
            }
        }
        Self { k, keys: keys.to_vec(), powers }
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl PolyHashSeed<M61> {
    /// Field values at every key of `table`; same results as [`Self::eval_field`].
    pub fn eval_field_table(&self, table: &PowerTable, out: &mut Vec<Fp<M61>>) {
        let k = self.coeffs.len();
        assert!(k <= table.k, "power table too short for this polynomial");
        out.clear();
        out.reserve(table.keys.len());
        for row in table.powers.chunks_exact(table.k) {
            let mut acc = 0u64;
            for (cs, ps) in self.coeffs.chunks(32).zip(row[..k].chunks(32)) {
                let mut block = 0u128;
                for (c, &x) in cs.iter().zip(ps) {
                    block += c.value() as u128 * x as u128;
                }
                acc += m61_reduce128(block);
                acc = (acc & MERSENNE_61) + (acc >> 61);
            }
            out.push(Fp::from_canonical(Self::fold(acc)));
        }
    }

    #[inline(always)]
    fn fold(acc: u64) -> u64 {
        m61_finish((acc & MERSENNE_61) + (acc >> 61))
    }
}

#[inline(always)]
pub(crate) fn horner<M: Modulus>(coeffs: &[Fp<M>], x: Fp<M>) -> Fp<M> {
    let mut acc = Fp::from_canonical(0);
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Draws a `k`-wise independent seed over `2^61 - 1`.
pub fn kwise_new<R: Rng + ?Sized>(k: usize, range: u64, rng: &mut R) -> Result<PolyHashSeed> {
    PolyHashSeed::random(k, range, rng)
}

pub fn kwise_eval(seed: &PolyHashSeed, x: u64) -> u64 {
    seed.eval(x)
}

pub fn sign_eval(seed: &PolyHashSeed, x: u64) -> i64 {
    seed.sign(x)
}

/// Hash family that is `z`-wise independent on every fixed set of `z` keys.
///
/// Realized as a degree-`(z - 1)` polynomial, which makes the independence
/// exact on every `z`-subset. The failure exponent `c` is carried for
/// provenance only; it has no effect on this realization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformOnSetSeed<M: Modulus = M61> {
    z: usize,
    c: u32,
    poly: PolyHashSeed<M>,
}

impl<M: Modulus> UniformOnSetSeed<M> {
    pub fn random<R: Rng + ?Sized>(z: usize, range: u64, c: u32, rng: &mut R) -> Result<Self> {
        if z < 2 {
            return invalid("uniform-on-set family needs z >= 2");
        }
        if range < 2 {
            return invalid("uniform-on-set family needs range >= 2");
        }
        if range > M::P {
            return invalid(format!("range {range} exceeds the field modulus"));
        }
        Ok(Self { z, c, poly: PolyHashSeed::random(z, range, rng)? })
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn range(&self) -> u64 {
        self.poly.range()
    }

    pub fn poly(&self) -> &PolyHashSeed<M> {
        &self.poly
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        self.poly.eval(x)
    }

    pub fn eval_batch(&self, tree: &ProductTree<M>) -> Vec<u64> {
        self.poly.eval_batch(tree)
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.u32(self.z as u32);
        w.u32(self.c);
        self.poly.write_into(w);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let z = r.u32()? as usize;
        let c = r.u32()?;
        let poly = PolyHashSeed::read_from(r)?;
        if poly.k() != z {
            return Err(SketchError::Codec("uniform-on-set degree mismatch".into()));
        }
        Ok(Self { z, c, poly })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::UniformOnSet);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::UniformOnSet)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

pub fn uniform_on_set_new<R: Rng + ?Sized>(
    z: usize,
    range: u64,
    c: u32,
    rng: &mut R,
) -> Result<UniformOnSetSeed> {
    UniformOnSetSeed::random(z, range, c, rng)
}
