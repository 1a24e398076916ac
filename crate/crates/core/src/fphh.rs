//! F_p heavy hitters by a dyadic descent over index prefixes, with a
//! CountSketch for signs.
//!
//! Level `k` keeps, for each repetition, `R` buckets of small stable-sketch
//! banks keyed by a pairwise hash of the length-`k` prefix of `i - 1`. A
//! bucket's median-of-bank estimate approximates the `F_p` mass of the
//! prefixes hashed there; the median over repetitions answers a prefix query.
//! Stable entries of repetition `j` depend only on `(j, i)` and are shared by
//! all levels and buckets.

use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::config::{FpConfig, StreamUpdate};
use crate::error::{invalid, Result, SketchError};
use crate::field::{F61, MERSENNE_61};
use crate::gme::{gme_value, FpEstBox};
use crate::hashing::PolyHashSeed;
use crate::scalar::Scalar;
use crate::stable::{gme_constant, StableSampler};
use crate::stats::median;

/// Number of bits needed to write indices of a universe of `n` items.
pub fn tree_depth(n: u64) -> u32 {
    64 - (n.max(2) - 1).leading_zeros()
}

/// First level kept in the dyadic descent: `ceil(log2 ceil(1/phi))`, capped at the leaf level.
pub fn top_level(phi: f64, depth: u32) -> u32 {
    let w = (1.0 / phi).ceil().max(1.0) as u64;
    (64 - (w.max(1) - 1).leading_zeros()).min(depth)
}

/// CountSketch with `i64` counters: pairwise bucket hashes and 4-wise signs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignSketch {
    h: Vec<PolyHashSeed>,
    sigma: Vec<PolyHashSeed>,
    counters: Vec<i64>,
}

impl SignSketch {
    pub fn new<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid("CountSketch needs at least one row and column");
        }
        let mut h = Vec::with_capacity(rows);
        let mut sigma = Vec::with_capacity(rows);
        for _ in 0..rows {
            h.push(PolyHashSeed::random(2, cols as u64, rng)?);
            sigma.push(PolyHashSeed::random(4, MERSENNE_61, rng)?);
        }
        Ok(Self { h, sigma, counters: vec![0; rows * cols] })
    }

    pub fn rows(&self) -> usize {
        self.h.len()
    }

    pub fn cols(&self) -> usize {
        self.counters.len() / self.h.len()
    }

    pub fn counter(&self, row: usize, col: usize) -> i64 {
        self.counters[row * self.cols() + col]
    }

    #[inline]
    pub fn update(&mut self, u: StreamUpdate) {
        let cols = self.cols();
        for i in 0..self.h.len() {
            let c = &mut self.counters[i * cols + self.h[i].eval(u.index) as usize];
            *c = c.wrapping_add(self.sigma[i].sign(u.index).wrapping_mul(u.delta));
        }
    }

    /// Per-row estimates `sigma_i(w) A[i][h_i(w)]` of `x_w`.
    pub fn row_estimates(&self, w: u64) -> Vec<i64> {
        (0..self.h.len())
            .map(|i| self.sigma[i].sign(w) * self.counter(i, self.h[i].eval(w) as usize))
            .collect()
    }

    /// Majority vote of the per-row signs; ties and all-zero rows give `+1`.
    pub fn sign_of(&self, w: u64) -> i64 {
        let vote: i64 = self.row_estimates(w).iter().map(|v| v.signum()).sum();
        if vote < 0 { -1 } else { 1 }
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.h != other.h || self.sigma != other.sigma {
            return Err(SketchError::Incompatible("CountSketch seeds differ".into()));
        }
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a = a.wrapping_add(*b);
        }
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.len(self.h.len());
        for (h, s) in self.h.iter().zip(&self.sigma) {
            h.write_into(w);
            s.write_into(w);
        }
        w.i64s(&self.counters);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let rows = r.len()?;
        if rows == 0 {
            return Err(SketchError::Codec("empty CountSketch".into()));
        }
        let (mut h, mut sigma) = (Vec::with_capacity(rows), Vec::with_capacity(rows));
        for _ in 0..rows {
            h.push(PolyHashSeed::read_from(r)?);
            sigma.push(PolyHashSeed::read_from(r)?);
        }
        let counters = r.i64s()?;
        if counters.len() != rows * h[0].range() as usize {
            return Err(SketchError::Codec("CountSketch counter count mismatch".into()));
        }
        Ok(Self { h, sigma, counters })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::CountSketch);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::CountSketch)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

/// A reported heavy coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeavyHitterRecord {
    pub index: u64,
    pub sign: i64,
    /// Estimate of `|x_index|^p` from the leaf query.
    pub mag_p: f64,
}

/// Result of a descent.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HeavyReport {
    pub records: Vec<HeavyHitterRecord>,
    /// Number of prefixes queried at each level, top level first.
    pub frontier: Vec<usize>,
    /// Estimate of `F_p` used for the thresholds.
    pub fp_tilde: f64,
}

/// Shape of an [`FpHh`] structure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpHhShape {
    pub p: f64,
    /// Universe size; indices are `1..=n`.
    pub n: u64,
    pub phi: f64,
    pub buckets: usize,
    pub reps: usize,
    pub bank: usize,
    pub rows: usize,
    pub k: usize,
    pub cs_rows: usize,
    pub cs_cols: usize,
    pub box_bank: usize,
    pub box_rows: usize,
    pub precision_bits: u32,
}

impl FpHhShape {
    pub fn from_config(cfg: &FpConfig) -> Self {
        Self {
            p: cfg.p,
            n: cfg.n_reduced,
            phi: cfg.phi_hh,
            buckets: cfg.hh_buckets,
            reps: cfg.hh_reps,
            bank: cfg.hh_bank,
            rows: cfg.hh_rows,
            k: cfg.k_box,
            cs_rows: cfg.cs_rows,
            cs_cols: cfg.cs_cols,
            box_bank: cfg.box_bank,
            box_rows: cfg.box_rows,
            precision_bits: cfg.precision_bits,
        }
    }
}

/// Heavy-hitter state: one bucket grid per tree level, a global estimator and
/// a CountSketch.
#[derive(Clone, Debug, PartialEq)]
pub struct FpHh<S: Scalar = f64> {
    shape: FpHhShape,
    depth: u32,
    top: u32,
    sampler: StableSampler,
    constant: f64,
    /// `reps * bank * rows` seed pairs for the stable entries.
    variates: Vec<[PolyHashSeed; 2]>,
    /// `levels * reps` pairwise prefix hashes into `[buckets]`.
    bucket_hash: Vec<PolyHashSeed>,
    acc: Vec<S>,
    global: FpEstBox<S>,
    signs: SignSketch,
}

impl<S: Scalar> FpHh<S> {
    pub fn new<R: Rng + ?Sized>(shape: FpHhShape, rng: &mut R) -> Result<Self> {
        if !(shape.phi > 0.0 && shape.phi <= 1.0) {
            return invalid("phi must lie in (0, 1]");
        }
        if shape.buckets == 0 || shape.reps == 0 || shape.bank == 0 || shape.n == 0 {
            return invalid("heavy-hitter shape has an empty dimension");
        }
        let sampler = StableSampler::new(shape.p, shape.precision_bits)?;
        let constant = gme_constant(shape.rows, shape.p)?;
        let depth = tree_depth(shape.n);
        let top = top_level(shape.phi, depth);
        let levels = (depth - top + 1) as usize;
        let variates = (0..shape.reps * shape.bank * shape.rows)
            .map(|_| {
                Ok([
                    PolyHashSeed::random(shape.k, MERSENNE_61, rng)?,
                    PolyHashSeed::random(shape.k, MERSENNE_61, rng)?,
                ])
            })
            .collect::<Result<_>>()?;
        let bucket_hash = (0..levels * shape.reps)
            .map(|_| PolyHashSeed::random(2, shape.buckets as u64, rng))
            .collect::<Result<_>>()?;
        let global = FpEstBox::new(shape.p, shape.box_bank, shape.box_rows, shape.k, shape.precision_bits, rng)?;
        let signs = SignSketch::new(shape.cs_rows, shape.cs_cols, rng)?;
        let cells = levels * shape.reps * shape.buckets * shape.bank * shape.rows;
        Ok(Self {
            shape,
            depth,
            top,
            sampler,
            constant,
            variates,
            bucket_hash,
            acc: vec![S::zero(); cells],
            global,
            signs,
        })
    }

    pub fn from_config<R: Rng + ?Sized>(cfg: &FpConfig, rng: &mut R) -> Result<Self> {
        Self::new(FpHhShape::from_config(cfg), rng)
    }

    pub fn shape(&self) -> &FpHhShape {
        &self.shape
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn top(&self) -> u32 {
        self.top
    }

    pub fn levels(&self) -> usize {
        (self.depth - self.top + 1) as usize
    }

    pub fn global(&self) -> &FpEstBox<S> {
        &self.global
    }

    pub fn signs(&self) -> &SignSketch {
        &self.signs
    }

    /// Length-`level` prefix of `index - 1`.
    pub fn prefix(&self, index: u64, level: u32) -> u64 {
        (index - 1) >> (self.depth - level)
    }

    /// Bucket of prefix `t` at `level` in repetition `rep`.
    pub fn bucket(&self, level: u32, rep: usize, t: u64) -> usize {
        self.bucket_hash[(level - self.top) as usize * self.shape.reps + rep].eval(t) as usize
    }

    fn cell_width(&self) -> usize {
        self.shape.bank * self.shape.rows
    }

    fn cell_start(&self, level: u32, rep: usize, bucket: usize) -> usize {
        let li = (level - self.top) as usize;
        ((li * self.shape.reps + rep) * self.shape.buckets + bucket) * self.cell_width()
    }

    /// Accumulators of one bucket: `bank` groups of `rows` values.
    pub fn cell(&self, level: u32, rep: usize, bucket: usize) -> &[S] {
        let s = self.cell_start(level, rep, bucket);
        &self.acc[s..s + self.cell_width()]
    }

    #[inline]
    fn variate(&self, seed: usize, index: u64) -> f64 {
        let [a, b] = &self.variates[seed];
        self.sampler.sample_field(a.eval_field(index).value(), b.eval_field(index).value())
    }

    pub fn update(&mut self, u: StreamUpdate) {
        self.global.update(u);
        self.signs.update(u);
        let width = self.cell_width();
        let d = u.delta as f64;
        let mut z = vec![0.0; width];
        for rep in 0..self.shape.reps {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc = self.variate(rep * width + c, u.index) * d;
            }
            for level in self.top..=self.depth {
                let b = self.bucket(level, rep, self.prefix(u.index, level));
                let s = self.cell_start(level, rep, b);
                for (a, zc) in self.acc[s..s + width].iter_mut().zip(&z) {
                    *a = *a + S::of(*zc);
                }
            }
        }
    }

    /// Adds a sparse vector of distinct-or-repeated `(index, delta)` entries.
    pub fn ingest(&mut self, entries: &[(u64, i64)]) {
        if entries.is_empty() {
            return;
        }
        self.global.ingest(entries);
        for &(i, d) in entries {
            self.signs.update(StreamUpdate::new(i, d));
        }
        let xs: Vec<u64> = entries.iter().map(|e| e.0).collect();
        let width = self.cell_width();
        let (mut va, mut vb): (Vec<F61>, Vec<F61>) = (Vec::new(), Vec::new());
        let mut starts = vec![0usize; xs.len() * self.levels()];
        for rep in 0..self.shape.reps {
            for (e, &x) in xs.iter().enumerate() {
                for level in self.top..=self.depth {
                    let b = self.bucket(level, rep, self.prefix(x, level));
                    starts[e * self.levels() + (level - self.top) as usize] = self.cell_start(level, rep, b);
                }
            }
            for c in 0..width {
                let [a, b] = &self.variates[rep * width + c];
                a.eval_field_many(&xs, &mut va);
                b.eval_field_many(&xs, &mut vb);
                for (e, &(_, d)) in entries.iter().enumerate() {
                    let z = S::of(self.sampler.sample_field(va[e].value(), vb[e].value()) * d as f64);
                    for &s in &starts[e * self.levels()..(e + 1) * self.levels()] {
                        self.acc[s + c] = self.acc[s + c] + z;
                    }
                }
            }
        }
    }

    fn cell_estimate(&self, level: u32, rep: usize, bucket: usize) -> f64 {
        let rows = self.shape.rows;
        let mut bank: Vec<f64> = self
            .cell(level, rep, bucket)
            .chunks_exact(rows)
            .map(|y| gme_value(y, self.shape.p, self.constant, f64::INFINITY, 1.0))
            .collect();
        median(&mut bank).unwrap_or(0.0)
    }

    /// Median over repetitions of the bucket estimate for prefix `t`.
    pub fn query(&self, level: u32, t: u64) -> f64 {
        let mut v: Vec<f64> = (0..self.shape.reps)
            .map(|rep| self.cell_estimate(level, rep, self.bucket(level, rep, t)))
            .collect();
        median(&mut v).unwrap_or(0.0)
    }

    /// Global estimate of `F_p`.
    pub fn fp_estimate(&self) -> f64 {
        self.global.estimate()
    }

    /// Descends from the top level keeping prefixes whose query is at least
    /// `3 phi F / 4`, with `F` the global estimate.
    pub fn report(&self, phi: f64) -> HeavyReport {
        self.report_with(phi, self.fp_estimate())
    }

    pub fn report_with(&self, phi: f64, fp_tilde: f64) -> HeavyReport {
        let mut out = HeavyReport { fp_tilde, ..Default::default() };
        if !(fp_tilde > 0.0) {
            return out;
        }
        let threshold = 0.75 * phi * fp_tilde;
        let mut frontier: Vec<u64> = (0..1u64 << self.top).collect();
        for level in self.top..=self.depth {
            out.frontier.push(frontier.len());
            let mut next = Vec::new();
            for &t in &frontier {
                let q = self.query(level, t);
                if q < threshold {
                    continue;
                }
                if level == self.depth {
                    let index = t + 1;
                    if index <= self.shape.n {
                        let sign = self.signs.sign_of(index);
                        out.records.push(HeavyHitterRecord { index, sign, mag_p: q });
                    }
                } else {
                    next.push(2 * t);
                    next.push(2 * t + 1);
                }
            }
            frontier = next;
        }
        out
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.variates != other.variates || self.bucket_hash != other.bucket_hash || self.shape != other.shape {
            return Err(SketchError::Incompatible("heavy-hitter seeds differ".into()));
        }
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            *a = *a + *b;
        }
        self.global.merge(&other.global)?;
        self.signs.merge(&other.signs)
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        let s = &self.shape;
        w.f64(s.p);
        w.u64(s.n);
        w.f64(s.phi);
        for v in [s.buckets, s.reps, s.bank, s.rows, s.k, s.cs_rows, s.cs_cols, s.box_bank, s.box_rows] {
            w.u64(v as u64);
        }
        w.u32(s.precision_bits);
        for [a, b] in &self.variates {
            a.write_into(w);
            b.write_into(w);
        }
        for h in &self.bucket_hash {
            h.write_into(w);
        }
        w.scalars(&self.acc);
        self.global.write_into(w);
        self.signs.write_into(w);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let p = r.f64()?;
        let n = r.u64()?;
        let phi = r.f64()?;
        let mut dims = [0usize; 9];
        for d in &mut dims {
            *d = usize::try_from(r.u64()?).map_err(|_| SketchError::Codec("dimension overflow".into()))?;
        }
        let [buckets, reps, bank, rows, k, cs_rows, cs_cols, box_bank, box_rows] = dims;
        let shape = FpHhShape {
            p, n, phi, buckets, reps, bank, rows, k, cs_rows, cs_cols, box_bank, box_rows,
            precision_bits: r.u32()?,
        };
        if n == 0 || !(phi > 0.0 && phi <= 1.0) || buckets == 0 || reps == 0 || bank == 0 || rows == 0 {
            return Err(SketchError::Codec("bad heavy-hitter shape".into()));
        }
        let sampler = StableSampler::new(p, shape.precision_bits).map_err(|e| SketchError::Codec(e.to_string()))?;
        let constant = gme_constant(rows, p).map_err(|e| SketchError::Codec(e.to_string()))?;
        let depth = tree_depth(n);
        let top = top_level(phi, depth);
        let levels = (depth - top + 1) as usize;
        let mut variates = Vec::new();
        for _ in 0..reps * bank * rows {
            variates.push([PolyHashSeed::read_from(r)?, PolyHashSeed::read_from(r)?]);
        }
        let bucket_hash = (0..levels * reps).map(|_| PolyHashSeed::read_from(r)).collect::<Result<Vec<_>>>()?;
        let acc: Vec<S> = r.scalars()?;
        if acc.len() != levels * reps * buckets * bank * rows {
            return Err(SketchError::Codec("accumulator count mismatch".into()));
        }
        let global = FpEstBox::read_from(r)?;
        let signs = SignSketch::read_from(r)?;
        Ok(Self { shape, depth, top, sampler, constant, variates, bucket_hash, acc, global, signs })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::FpHh);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::FpHh)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

pub fn fphh_update<S: Scalar>(state: &mut FpHh<S>, u: StreamUpdate) {
    state.update(u);
}

pub fn basic_query<S: Scalar>(state: &FpHh<S>, level: u32, t: u64) -> f64 {
    state.query(level, t)
}

pub fn fphh_report<S: Scalar>(state: &FpHh<S>, phi: f64) -> HeavyReport {
    state.report(phi)
}
