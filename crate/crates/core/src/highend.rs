//! Roots-of-unity sketch for the contribution of the heavy coordinates.
//!
//! Row `j` hashes coordinate `v` to bucket `h_j(v)` and adds
//! `exp(2 pi i g_j(v) / r) * delta` there. For every heavy `w` the rows where
//! `w` sits alone among the heavy list give unbiased looks at `|x_w|` after
//! undoing the phase and sign; the first `T` of them are averaged.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Debug;

use num_complex::Complex;
use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::config::{FpConfig, StreamUpdate};
use crate::error::{invalid, Result, SketchError};
use crate::hashing::PolyHashSeed;
use crate::scalar::Scalar;

/// Why a HighEnd query abstained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HighEndFailure {
    /// Some heavy coordinate is isolated in fewer than `T` rows.
    NotIsolated { index: u64, rows: usize },
    /// Some recovered value has a negative real part.
    NegativeReal { index: u64 },
}

impl std::fmt::Display for HighEndFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NotIsolated { index, rows } => write!(f, "{index} isolated in only {rows} rows"),
            Self::NegativeReal { index } => write!(f, "negative real part at {index}"),
        }
    }
}

/// Storage for a matrix of complex counters updated by `r`-th roots of unity.
pub trait PhaseAccumulator: Clone + Debug + PartialEq + Send + Sync {
    const TAG: u8;
    fn zeros(cells: usize, r: u32, frac_bits: u32) -> Self;
    fn add(&mut self, cell: usize, phase: u32, delta: i64);
    fn get(&self, cell: usize) -> Complex<f64>;
    fn cells(&self) -> usize;
    fn merge(&mut self, other: &Self);
    fn write_into(&self, w: &mut Writer);
    fn read_from(r: &mut Reader<'_>, cells: usize, order: u32) -> Result<Self>;
}

fn roots(r: u32) -> Vec<Complex<f64>> {
    (0..r).map(|k| Complex::from_polar(1.0, 2.0 * PI * k as f64 / r as f64)).collect()
}

/// Floating-point counters.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCounters<S: Scalar = f64> {
    table: Vec<Complex<S>>,
    cells: Vec<Complex<S>>,
}

impl<S: Scalar> PhaseAccumulator for ComplexCounters<S> {
    const TAG: u8 = S::TAG;

    fn zeros(cells: usize, r: u32, _frac_bits: u32) -> Self {
        let table = roots(r).into_iter().map(|c| Complex::new(S::of(c.re), S::of(c.im))).collect();
        Self { table, cells: vec![Complex::new(S::zero(), S::zero()); cells] }
    }

    #[inline]
    fn add(&mut self, cell: usize, phase: u32, delta: i64) {
        let d = S::of(delta as f64);
        let w = self.table[phase as usize];
        let c = &mut self.cells[cell];
        c.re = c.re + w.re * d;
        c.im = c.im + w.im * d;
    }

    fn get(&self, cell: usize) -> Complex<f64> {
        let c = self.cells[cell];
        Complex::new(c.re.as_f64(), c.im.as_f64())
    }

    fn cells(&self) -> usize {
        self.cells.len()
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.re = a.re + b.re;
            a.im = a.im + b.im;
        }
    }

    fn write_into(&self, w: &mut Writer) {
        let flat: Vec<S> = self.cells.iter().flat_map(|c| [c.re, c.im]).collect();
        w.scalars(&flat);
    }

    fn read_from(r: &mut Reader<'_>, cells: usize, order: u32) -> Result<Self> {
        let flat: Vec<S> = r.scalars()?;
        if flat.len() != 2 * cells {
            return Err(SketchError::Codec("counter count mismatch".into()));
        }
        let mut out = Self::zeros(0, order, 0);
        out.cells = flat.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect();
        Ok(out)
    }
}

/// Fixed-point counters: roots quantized to `frac_bits` fractional bits and
/// accumulated exactly in `i128`, so merges are bit-exact.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedCounters {
    frac_bits: u32,
    table: Vec<(i128, i128)>,
    cells: Vec<(i128, i128)>,
}

impl FixedCounters {
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Fractional bits for per-component precision `eps^2 / (2 m T)`.
    pub fn bits_for(eps: f64, m: u64, t: usize) -> u32 {
        ((2.0 * m as f64 * t as f64 / (eps * eps)).log2().ceil() as u32).clamp(1, 60)
    }
}

impl PhaseAccumulator for FixedCounters {
    const TAG: u8 = 128;

    fn zeros(cells: usize, r: u32, frac_bits: u32) -> Self {
        let scale = (frac_bits as f64).exp2();
        let table = roots(r)
            .into_iter()
            .map(|c| ((c.re * scale).round() as i128, (c.im * scale).round() as i128))
            .collect();
        Self { frac_bits, table, cells: vec![(0, 0); cells] }
    }

    #[inline]
    fn add(&mut self, cell: usize, phase: u32, delta: i64) {
        let (wr, wi) = self.table[phase as usize];
        let c = &mut self.cells[cell];
        c.0 += wr * delta as i128;
        c.1 += wi * delta as i128;
    }

    fn get(&self, cell: usize) -> Complex<f64> {
        let scale = (-(self.frac_bits as f64)).exp2();
        let (a, b) = self.cells[cell];
        Complex::new(a as f64 * scale, b as f64 * scale)
    }

    fn cells(&self) -> usize {
        self.cells.len()
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }

    fn write_into(&self, w: &mut Writer) {
        w.u32(self.frac_bits);
        w.len(self.cells.len());
        for &(a, b) in &self.cells {
            w.i128(a);
            w.i128(b);
        }
    }

    fn read_from(r: &mut Reader<'_>, cells: usize, order: u32) -> Result<Self> {
        let frac_bits = r.u32()?;
        if frac_bits > 60 {
            return Err(SketchError::Codec("fractional bits out of range".into()));
        }
        let n = r.len()?;
        if n != cells {
            return Err(SketchError::Codec("counter count mismatch".into()));
        }
        let mut out = Self::zeros(0, order, frac_bits);
        out.cells = (0..n).map(|_| Ok((r.i128()?, r.i128()?))).collect::<Result<_>>()?;
        Ok(out)
    }
}

/// Rows isolating each heavy coordinate, in increasing row order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsolationTable {
    pub entries: Vec<(u64, Vec<usize>)>,
}

impl IsolationTable {
    pub fn rows_for(&self, w: u64) -> Option<&[usize]> {
        self.entries.iter().find(|e| e.0 == w).map(|e| e.1.as_slice())
    }
}

/// `t x s` counter matrix with per-row bucket and phase hashes.
#[derive(Clone, Debug, PartialEq)]
pub struct HighEndSketch<A: PhaseAccumulator = ComplexCounters<f64>> {
    p: f64,
    r: u32,
    t_big: usize,
    s: usize,
    taylor_degree: usize,
    h: Vec<PolyHashSeed>,
    g: Vec<PolyHashSeed>,
    counters: A,
}

/// Double-precision HighEnd sketch.
pub type HighEnd = HighEndSketch<ComplexCounters<f64>>;
/// Fixed-point HighEnd sketch.
pub type HighEndFixed = HighEndSketch<FixedCounters>;

/// Taylor polynomial of `cos` with terms up to `theta^degree`.
pub fn taylor_cos(theta: f64, degree: usize) -> f64 {
    let x2 = theta * theta;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 2;
    while k <= degree {
        term *= -x2 / ((k - 1) * k) as f64;
        sum += term;
        k += 2;
    }
    sum
}

impl<A: PhaseAccumulator> HighEndSketch<A> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        p: f64,
        r: u32,
        t_big: usize,
        s: usize,
        r_h: usize,
        taylor_degree: usize,
        frac_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        if r < 2 || !r.is_multiple_of(2) {
            return invalid("r must be even and at least 2");
        }
        if t_big == 0 || s < 1 {
            return invalid("HighEnd needs T >= 1 and s >= 1");
        }
        let t_rows = 3 * t_big;
        let h = (0..t_rows).map(|_| PolyHashSeed::random(r_h, s as u64, rng)).collect::<Result<_>>()?;
        let g = (0..t_rows).map(|_| PolyHashSeed::random(r as usize, r as u64, rng)).collect::<Result<_>>()?;
        Ok(Self {
            p,
            r,
            t_big,
            s,
            taylor_degree,
            h,
            g,
            counters: A::zeros(t_rows * s, r, frac_bits),
        })
    }

    pub fn from_config<R: Rng + ?Sized>(cfg: &FpConfig, rng: &mut R) -> Result<Self> {
        let bits = FixedCounters::bits_for(cfg.eps, cfg.m_bound, cfg.t_big);
        Self::new(cfg.p, cfg.r, cfg.t_big, cfg.s, cfg.r_h as usize, cfg.taylor_degree, bits, rng)
    }

    /// Builds from explicit hash seeds (used by exhaustive tests).
    pub fn with_seeds(p: f64, r: u32, t_big: usize, s: usize, h: Vec<PolyHashSeed>, g: Vec<PolyHashSeed>, frac_bits: u32) -> Result<Self> {
        if h.len() != 3 * t_big || g.len() != 3 * t_big {
            return invalid("need 3T seeds for each of h and g");
        }
        Ok(Self { p, r, t_big, s, taylor_degree: 64, h, g, counters: A::zeros(3 * t_big * s, r, frac_bits) })
    }

    pub fn t_rows(&self) -> usize {
        self.h.len()
    }

    pub fn t_big(&self) -> usize {
        self.t_big
    }

    pub fn buckets(&self) -> usize {
        self.s
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn bucket(&self, row: usize, index: u64) -> usize {
        self.h[row].eval(index) as usize
    }

    pub fn phase(&self, row: usize, index: u64) -> u32 {
        self.g[row].eval(index) as u32
    }

    pub fn counter(&self, row: usize, bucket: usize) -> Complex<f64> {
        self.counters.get(row * self.s + bucket)
    }

    pub fn counters(&self) -> &A {
        &self.counters
    }

    #[inline]
    pub fn update(&mut self, u: StreamUpdate) {
        for j in 0..self.h.len() {
            let k = self.h[j].eval(u.index) as usize;
            let phase = self.g[j].eval(u.index) as u32;
            self.counters.add(j * self.s + k, phase, u.delta);
        }
    }

    /// Marks the rows where each member of `heavy` has its bucket to itself.
    pub fn build_isolation(
        &self,
        heavy: &[u64],
    ) -> Result<std::result::Result<IsolationTable, HighEndFailure>> {
        let mut seen = HashSet::with_capacity(heavy.len());
        if !heavy.iter().all(|w| seen.insert(*w)) {
            return invalid("duplicate entries in the heavy list");
        }
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); heavy.len()];
        let mut load = vec![0u32; self.s];
        let mut buckets = vec![0usize; heavy.len()];
        for j in 0..self.h.len() {
            for (i, &w) in heavy.iter().enumerate() {
                buckets[i] = self.bucket(j, w);
                load[buckets[i]] += 1;
            }
            for (i, &b) in buckets.iter().enumerate() {
                if load[b] == 1 {
                    lists[i].push(j);
                }
            }
            for &b in &buckets {
                load[b] = 0;
            }
        }
        for (i, &w) in heavy.iter().enumerate() {
            if lists[i].len() < self.t_big {
                return Ok(Err(HighEndFailure::NotIsolated { index: w, rows: lists[i].len() }));
            }
        }
        Ok(Ok(IsolationTable { entries: heavy.iter().copied().zip(lists).collect() }))
    }

    /// `x_w^* = (1/T) sum_k conj(omega^{g(w)}) sign D[j_k][h(w)]` over the first `T` isolating rows.
    pub fn recover(&self, table: &IsolationTable, w: u64, sign: i64) -> Option<Complex<f64>> {
        let rows = table.rows_for(w)?;
        let mut acc = Complex::new(0.0, 0.0);
        for &j in rows.iter().take(self.t_big) {
            let theta = -2.0 * PI * self.phase(j, w) as f64 / self.r as f64;
            acc += Complex::from_polar(1.0, theta) * self.counter(j, self.bucket(j, w)) * sign as f64;
        }
        Some(acc / self.t_big as f64)
    }

    /// `Psi = sum_w |x_w^*|^p cos(p arg x_w^*)`, cosine by its Taylor series.
    pub fn estimate(
        &self,
        table: &IsolationTable,
        signed: &[(u64, i64)],
    ) -> std::result::Result<f64, HighEndFailure> {
        let mut psi = 0.0;
        for &(w, sign) in signed {
            let x = self
                .recover(table, w, sign)
                .ok_or(HighEndFailure::NotIsolated { index: w, rows: 0 })?;
            if x.re < 0.0 {
                return Err(HighEndFailure::NegativeReal { index: w });
            }
            let norm2 = x.norm_sqr();
            if norm2 == 0.0 || !norm2.is_normal() {
                continue;
            }
            let mag = (0.5 * self.p * norm2.ln()).exp();
            psi += mag * taylor_cos(self.p * x.arg(), self.taylor_degree);
        }
        Ok(psi)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.h != other.h || self.g != other.g || self.r != other.r {
            return Err(SketchError::Incompatible("HighEnd seeds differ".into()));
        }
        self.counters.merge(&other.counters);
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.u8(A::TAG);
        w.f64(self.p);
        w.u32(self.r);
        w.u32(self.t_big as u32);
        w.u32(self.s as u32);
        w.u32(self.taylor_degree as u32);
        for (h, g) in self.h.iter().zip(&self.g) {
            h.write_into(w);
            g.write_into(w);
        }
        self.counters.write_into(w);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        if r.u8()? != A::TAG {
            return Err(SketchError::Codec("counter type mismatch".into()));
        }
        let p = r.f64()?;
        let order = r.u32()?;
        let t_big = r.u32()? as usize;
        let s = r.u32()? as usize;
        let taylor_degree = r.u32()? as usize;
        if order < 2 || t_big == 0 || s == 0 {
            return Err(SketchError::Codec("bad HighEnd shape".into()));
        }
        let (mut h, mut g) = (Vec::new(), Vec::new());
        for _ in 0..3 * t_big {
            h.push(PolyHashSeed::read_from(r)?);
            g.push(PolyHashSeed::read_from(r)?);
        }
        let counters = A::read_from(r, 3 * t_big * s, order)?;
        Ok(Self { p, r: order, t_big, s, taylor_degree, h, g, counters })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::HighEnd);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::HighEnd)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

pub fn highend_update<A: PhaseAccumulator>(sk: &mut HighEndSketch<A>, u: StreamUpdate) {
    sk.update(u);
}

pub fn build_isolation<A: PhaseAccumulator>(
    sk: &HighEndSketch<A>,
    heavy: &[u64],
) -> Result<std::result::Result<IsolationTable, HighEndFailure>> {
    sk.build_isolation(heavy)
}

pub fn highend_estimate<A: PhaseAccumulator>(
    sk: &HighEndSketch<A>,
    table: &IsolationTable,
    signed: &[(u64, i64)],
) -> std::result::Result<f64, HighEndFailure> {
    sk.estimate(table, signed)
}
