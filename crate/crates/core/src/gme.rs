//! Geometric-mean estimator over p-stable projections, and the
//! constant-accuracy estimator built from a bank of them.

use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::config::StreamUpdate;
use crate::error::{invalid, Result, SketchError};
use crate::field::F61;
use crate::hashing::{PolyHashSeed, PowerTable};
use crate::scalar::Scalar;
use crate::stable::{gme_constant, StableSampler};
use crate::stats::median;

/// `min(C prod_j |y_j|^{p/t}, fp_tilde / eps)`, or 0 when some `y_j` is 0.
///
/// Pass `fp_tilde = f64::INFINITY` to disable the truncation.
pub fn gme_value<S: Scalar>(y: &[S], p: f64, constant: f64, fp_tilde: f64, eps: f64) -> f64 {
    let mut log_sum = 0.0;
    for v in y {
        let a = v.as_f64().abs();
        if a == 0.0 {
            return 0.0;
        }
        log_sum += a.ln();
    }
    let est = constant * (p / y.len() as f64 * log_sum).exp();
    est.min(fp_tilde / eps)
}

/// `t` stable projections `y = A x` with k-wise independent entries.
///
/// Row `j` draws `A[j][i]` from the top bits of two polynomial hashes
/// evaluated at `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GmeSketch<S: Scalar = f64> {
    sampler: StableSampler,
    constant: f64,
    seeds: Vec<[PolyHashSeed; 2]>,
    y: Vec<S>,
}

impl<S: Scalar> GmeSketch<S> {
    pub fn new<R: Rng + ?Sized>(
        p: f64,
        rows: usize,
        k: usize,
        precision_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let sampler = StableSampler::new(p, precision_bits)?;
        let constant = gme_constant(rows, p)?;
        let mut seeds = Vec::with_capacity(rows);
        for _ in 0..rows {
            seeds.push([
                PolyHashSeed::random(k, crate::field::MERSENNE_61, rng)?,
                PolyHashSeed::random(k, crate::field::MERSENNE_61, rng)?,
            ]);
        }
        Ok(Self { sampler, constant, seeds, y: vec![S::zero(); rows] })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.seeds[0][0].k()
    }

    pub fn p(&self) -> f64 {
        self.sampler.p()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn y(&self) -> &[S] {
        &self.y
    }

    /// The stable entry `A[row][index]`.
    #[inline]
    pub fn variate(&self, row: usize, index: u64) -> f64 {
        let [a, b] = &self.seeds[row];
        self.sampler.sample_field(a.eval_field(index).value(), b.eval_field(index).value())
    }

    #[inline]
    pub fn update(&mut self, u: StreamUpdate) {
        let d = u.delta as f64;
        for j in 0..self.y.len() {
            let z = self.variate(j, u.index);
            self.y[j] = self.y[j] + S::of(z * d);
        }
    }

    /// Adds a whole sparse vector, evaluating the hashes in batches.
    pub fn ingest(&mut self, entries: &[(u64, i64)]) {
        let xs: Vec<u64> = entries.iter().map(|e| e.0).collect();
        let (mut va, mut vb): (Vec<F61>, Vec<F61>) = (Vec::new(), Vec::new());
        for j in 0..self.y.len() {
            let [a, b] = &self.seeds[j];
            a.eval_field_many(&xs, &mut va);
            b.eval_field_many(&xs, &mut vb);
            let mut acc = 0.0;
            for (i, e) in entries.iter().enumerate() {
                acc += self.sampler.sample_field(va[i].value(), vb[i].value()) * e.1 as f64;
            }
            self.y[j] = self.y[j] + S::of(acc);
        }
    }

    /// Like [`Self::ingest`] for the keys of `table`, with `deltas` aligned to them.
    pub fn ingest_table(&mut self, table: &PowerTable, deltas: &[i64]) {
        let (mut va, mut vb): (Vec<F61>, Vec<F61>) = (Vec::new(), Vec::new());
        for j in 0..self.y.len() {
            let [a, b] = &self.seeds[j];
            a.eval_field_table(table, &mut va);
            b.eval_field_table(table, &mut vb);
            let mut acc = 0.0;
            for (i, &d) in deltas.iter().enumerate() {
                acc += self.sampler.sample_field(va[i].value(), vb[i].value()) * d as f64;
            }
            self.y[j] = self.y[j] + S::of(acc);
        }
    }

    /// Truncated estimate `min(C prod |y_j|^{p/t}, fp_tilde / eps)`.
    pub fn estimate(&self, fp_tilde: f64, eps: f64) -> f64 {
        gme_value(&self.y, self.p(), self.constant, fp_tilde, eps)
    }

    /// Estimate without truncation.
    pub fn raw_estimate(&self) -> f64 {
        self.estimate(f64::INFINITY, 1.0)
    }

    pub fn clear(&mut self) {
        self.y.iter_mut().for_each(|v| *v = S::zero());
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.seeds != other.seeds || self.sampler != other.sampler {
            return Err(SketchError::Incompatible("sketch seeds differ".into()));
        }
        for (a, b) in self.y.iter_mut().zip(&other.y) {
            *a = *a + *b;
        }
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.f64(self.sampler.p());
        w.u32(self.sampler.precision_bits());
        w.len(self.seeds.len());
        for [a, b] in &self.seeds {
            a.write_into(w);
            b.write_into(w);
        }
        w.scalars(&self.y);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let p = r.f64()?;
        let bits = r.u32()?;
        let sampler = StableSampler::new(p, bits).map_err(|e| SketchError::Codec(e.to_string()))?;
        let rows = r.len()?;
        let mut seeds = Vec::with_capacity(rows);
        for _ in 0..rows {
            seeds.push([PolyHashSeed::read_from(r)?, PolyHashSeed::read_from(r)?]);
        }
        let y = r.scalars()?;
        if y.len() != rows {
            return Err(SketchError::Codec("row count mismatch".into()));
        }
        let constant = gme_constant(rows, p).map_err(|e| SketchError::Codec(e.to_string()))?;
        Ok(Self { sampler, constant, seeds, y })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Gme);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Gme)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

pub fn gme_update<S: Scalar>(sk: &mut GmeSketch<S>, u: StreamUpdate) {
    sk.update(u);
}

pub fn gme_estimate<S: Scalar>(sk: &GmeSketch<S>, fp_tilde: f64, eps: f64) -> f64 {
    sk.estimate(fp_tilde, eps)
}

/// Constant-factor estimator: median over a bank of independent sketches.
#[derive(Clone, Debug, PartialEq)]
pub struct FpEstBox<S: Scalar = f64> {
    bank: Vec<GmeSketch<S>>,
}

impl<S: Scalar> FpEstBox<S> {
    pub fn new<R: Rng + ?Sized>(
        p: f64,
        bank: usize,
        rows: usize,
        k: usize,
        precision_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        if bank == 0 {
            return invalid("estimator bank must be non-empty");
        }
        let bank = (0..bank)
            .map(|_| GmeSketch::new(p, rows, k, precision_bits, rng))
            .collect::<Result<_>>()?;
        Ok(Self { bank })
    }

    pub fn bank(&self) -> &[GmeSketch<S>] {
        &self.bank
    }

    pub fn update(&mut self, u: StreamUpdate) {
        for sk in &mut self.bank {
            sk.update(u);
        }
    }

    pub fn ingest(&mut self, entries: &[(u64, i64)]) {
        for sk in &mut self.bank {
            sk.ingest(entries);
        }
    }

    pub fn estimate(&self) -> f64 {
        let mut v: Vec<f64> = self.bank.iter().map(|s| s.raw_estimate()).collect();
        median(&mut v).unwrap_or(0.0)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.bank.len() != other.bank.len() {
            return Err(SketchError::Incompatible("bank sizes differ".into()));
        }
        for (a, b) in self.bank.iter_mut().zip(&other.bank) {
            a.merge(b)?;
        }
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.len(self.bank.len());
        for sk in &self.bank {
            sk.write_into(w);
        }
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let n = r.len()?;
        if n == 0 {
            return Err(SketchError::Codec("empty bank".into()));
        }
        let bank = (0..n).map(|_| GmeSketch::read_from(r)).collect::<Result<_>>()?;
        Ok(Self { bank })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::FpEstBox);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::FpEstBox)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}
