//! Bucketed geometric-mean estimator with parallel repetitions.
//!
//! `reps * R` sketches share randomness through two coefficient vectors per
//! (row, uniform): sketch `j = rep * R + bucket` draws its variates from the
//! polynomial `j * a + b`, which makes the sketches pairwise independent.
//! Updates are buffered; a flush evaluates every `a` and `b` once at all
//! buffered indices through a product tree and then forms `j * A(i) + B(i)`
//! per repetition.

use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::config::StreamUpdate;
use crate::error::{invalid, Result, SketchError};
use crate::field::{Fp, F61, MERSENNE_61};
use crate::gme::gme_value;
use crate::hashing::{PolyHashSeed, UniformOnSetSeed};
use crate::polyeval::{multipoint_eval, ProductTree};
use crate::scalar::Scalar;
use crate::stable::{gme_constant, StableSampler};

/// How buffered updates reach the accumulators.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FlushMode {
    /// Collect `d` updates, then evaluate through the product tree.
    Buffered,
    /// Evaluate every hash by Horner's rule on arrival.
    Horner,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct Pending {
    index: u64,
    bucket: u32,
    delta: i64,
}

/// Accumulators of all `reps * R` sketches plus the pending buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct LightState<S: Scalar = f64> {
    sampler: StableSampler,
    constant: f64,
    rows: usize,
    buckets: usize,
    reps: usize,
    capacity: usize,
    crossover: usize,
    mode: FlushMode,
    /// `[row][uniform]` pairs `(a, b)`.
    coeffs: Vec<[[PolyHashSeed; 2]; 2]>,
    acc: Vec<S>,
    buffer: Vec<Pending>,
}

impl<S: Scalar> LightState<S> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        p: f64,
        rows: usize,
        buckets: usize,
        reps: usize,
        k: usize,
        capacity: usize,
        precision_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        if buckets < 1 || reps < 1 || capacity < 1 {
            return invalid("light estimator needs buckets, repetitions and a buffer");
        }
        if buckets > u32::MAX as usize {
            return invalid("too many buckets");
        }
        let sampler = StableSampler::new(p, precision_bits)?;
        let constant = gme_constant(rows, p)?;
        let mut coeffs = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut pair = || -> Result<[PolyHashSeed; 2]> {
                Ok([
                    PolyHashSeed::random(k, MERSENNE_61, rng)?,
                    PolyHashSeed::random(k, MERSENNE_61, rng)?,
                ])
            };
            coeffs.push([pair()?, pair()?]);
        }
        Ok(Self {
            sampler,
            constant,
            rows,
            buckets,
            reps,
            capacity,
            crossover: crate::polyeval::DEFAULT_CROSSOVER,
            mode: FlushMode::Buffered,
            coeffs,
            acc: vec![S::zero(); rows * buckets * reps],
            buffer: Vec::with_capacity(capacity),
        })
    }

    pub fn with_mode(mut self, mode: FlushMode) -> Self {
        self.flush();
        self.mode = mode;
        self
    }

    pub fn with_crossover(mut self, crossover: usize) -> Self {
        self.crossover = crossover.max(1);
        self
    }

    pub fn mode(&self) -> FlushMode {
        self.mode
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Total number of geometric-mean sketches.
    pub fn sketch_count(&self) -> usize {
        self.buckets * self.reps
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Accumulators of sketch `rep * R + bucket`.
    pub fn sketch(&self, rep: usize, bucket: usize) -> &[S] {
        let off = (rep * self.buckets + bucket) * self.rows;
        &self.acc[off..off + self.rows]
    }

    /// Stable entry of sketch `rep * R + bucket`, row `row`, at `index`.
    pub fn variate(&self, rep: usize, bucket: usize, row: usize, index: u64) -> f64 {
        let c = &self.coeffs[row];
        let j = Fp::new((rep * self.buckets + bucket) as u64);
        let v0 = j * c[0][0].eval_field(index) + c[0][1].eval_field(index);
        let v1 = j * c[1][0].eval_field(index) + c[1][1].eval_field(index);
        self.sampler.sample_field(v0.value(), v1.value())
    }

    /// Routes `x[index] += delta` to `bucket` in every repetition.
    #[inline]
    pub fn update_routed(&mut self, index: u64, bucket: u64, delta: i64) {
        debug_assert!((bucket as usize) < self.buckets);
        let e = Pending { index, bucket: bucket as u32, delta };
        match self.mode {
            FlushMode::Horner => self.apply_horner(e),
            FlushMode::Buffered => {
                self.buffer.push(e);
                if self.buffer.len() >= self.capacity {
                    self.flush();
                }
            }
        }
    }

    #[inline]
    fn apply(&mut self, e: Pending, row: usize, vals: [[F61; 2]; 2]) {
        let d = e.delta as f64;
        for rep in 0..self.reps {
            let sid = (rep * self.buckets + e.bucket as usize) as u64;
            let j = Fp::new(sid);
            let v0 = j * vals[0][0] + vals[0][1];
            let v1 = j * vals[1][0] + vals[1][1];
            let z = self.sampler.sample_field(v0.value(), v1.value());
            let slot = sid as usize * self.rows + row;
            self.acc[slot] = self.acc[slot] + S::of(z * d);
        }
    }

    fn apply_horner(&mut self, e: Pending) {
        for row in 0..self.rows {
            let c = &self.coeffs[row];
            let vals = [
                [c[0][0].eval_field(e.index), c[0][1].eval_field(e.index)],
                [c[1][0].eval_field(e.index), c[1][1].eval_field(e.index)],
            ];
            self.apply(e, row, vals);
        }
    }

    /// Applies every buffered update. Two multipoint evaluations per
    /// (row, uniform) cover the whole batch.
    pub fn flush(&mut self) {
        if self.buffer.is_empty() {
            return;
        }
        let batch = std::mem::take(&mut self.buffer);
        let points: Vec<F61> = batch.iter().map(|e| F61::from_canonical(e.index)).collect();
        let tree = ProductTree::with_crossover(&points, self.crossover);
        let mut evals: Vec<[[Vec<F61>; 2]; 2]> = Vec::with_capacity(self.rows);
        for row in 0..self.rows {
            let c = &self.coeffs[row];
            evals.push([
                [multipoint_eval(c[0][0].coeffs(), &tree), multipoint_eval(c[0][1].coeffs(), &tree)],
                [multipoint_eval(c[1][0].coeffs(), &tree), multipoint_eval(c[1][1].coeffs(), &tree)],
            ]);
        }
        for (i, &e) in batch.iter().enumerate() {
            for (row, ev) in evals.iter().enumerate() {
                let vals = [[ev[0][0][i], ev[0][1][i]], [ev[1][0][i], ev[1][1][i]]];
                self.apply(e, row, vals);
            }
        }
        self.buffer = batch;
        self.buffer.clear();
    }

    /// `Phi' = (R / |I|) sum_{j in I} Est(sketch j)` for each repetition,
    /// where `I` is the set of buckets not flagged in `excluded`.
    pub fn rep_estimates(&mut self, fp_tilde: f64, eps: f64, excluded: &[bool]) -> Result<Vec<f64>> {
        self.flush();
        let kept: Vec<usize> = (0..self.buckets)
            .filter(|&b| !excluded.get(b).copied().unwrap_or(false))
            .collect();
        if kept.is_empty() {
            return Err(SketchError::NoLightBuckets);
        }
        let scale = self.buckets as f64 / kept.len() as f64;
        let p = self.sampler.p();
        Ok((0..self.reps)
            .map(|rep| {
                let sum: f64 = kept
                    .iter()
                    .map(|&b| gme_value(self.sketch(rep, b), p, self.constant, fp_tilde, eps))
                    .sum();
                scale * sum
            })
            .collect())
    }

    /// Average of [`Self::rep_estimates`].
    pub fn report(&mut self, fp_tilde: f64, eps: f64, excluded: &[bool]) -> Result<f64> {
        let v = self.rep_estimates(fp_tilde, eps, excluded)?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Fraction of kept-bucket estimates that hit the `fp_tilde / eps` cap.
    pub fn truncation_rate(&mut self, fp_tilde: f64, eps: f64) -> f64 {
        self.flush();
        let p = self.sampler.p();
        let cap = fp_tilde / eps;
        let mut hit = 0usize;
        for s in 0..self.sketch_count() {
            let y = &self.acc[s * self.rows..(s + 1) * self.rows];
            if gme_value(y, p, self.constant, f64::INFINITY, 1.0) >= cap {
                hit += 1;
            }
        }
        hit as f64 / self.sketch_count() as f64
    }

    fn compatible(&self, other: &Self) -> bool {
        self.sampler == other.sampler
            && self.rows == other.rows
            && self.buckets == other.buckets
            && self.reps == other.reps
            && self.coeffs == other.coeffs
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.compatible(other) {
            return Err(SketchError::Incompatible("light estimator seeds differ".into()));
        }
        let mut other = other.clone();
        other.flush();
        self.flush();
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            *a = *a + *b;
        }
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.f64(self.sampler.p());
        w.u32(self.sampler.precision_bits());
        w.u32(self.rows as u32);
        w.u32(self.buckets as u32);
        w.u32(self.reps as u32);
        w.u32(self.capacity as u32);
        w.u32(self.crossover as u32);
        w.u8(matches!(self.mode, FlushMode::Horner) as u8);
        for row in &self.coeffs {
            for pair in row {
                pair[0].write_into(w);
                pair[1].write_into(w);
            }
        }
        w.scalars(&self.acc);
        w.len(self.buffer.len());
        for e in &self.buffer {
            w.u64(e.index);
            w.u32(e.bucket);
            w.i64(e.delta);
        }
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let bad = |m: &str| SketchError::Codec(m.to_string());
        let p = r.f64()?;
        let bits = r.u32()?;
        let sampler = StableSampler::new(p, bits).map_err(|e| bad(&e.to_string()))?;
        let rows = r.u32()? as usize;
        let buckets = r.u32()? as usize;
        let reps = r.u32()? as usize;
        let capacity = r.u32()? as usize;
        let crossover = r.u32()? as usize;
        let mode = if r.u8()? == 1 { FlushMode::Horner } else { FlushMode::Buffered };
        let constant = gme_constant(rows, p).map_err(|e| bad(&e.to_string()))?;
        if buckets == 0 || reps == 0 || capacity == 0 {
            return Err(bad("empty light estimator"));
        }
        let mut coeffs = Vec::with_capacity(rows.min(1 << 16));
        for _ in 0..rows {
            let mut one = || -> Result<[PolyHashSeed; 2]> {
                Ok([PolyHashSeed::read_from(r)?, PolyHashSeed::read_from(r)?])
            };
            coeffs.push([one()?, one()?]);
        }
        let acc = r.scalars()?;
        if acc.len() != rows * buckets * reps {
            return Err(bad("accumulator count mismatch"));
        }
        let n = r.len()?;
        let mut buffer = Vec::with_capacity(n);
        for _ in 0..n {
            let e = Pending { index: r.u64()?, bucket: r.u32()?, delta: r.i64()? };
            if e.bucket as usize >= buckets || e.index >= MERSENNE_61 {
                return Err(bad("buffered update out of range"));
            }
            buffer.push(e);
        }
        Ok(Self { sampler, constant, rows, buckets, reps, capacity, crossover, mode, coeffs, acc, buffer })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Light);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Light)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

/// Stand-alone light estimator hashing indices to buckets itself.
#[derive(Clone, Debug, PartialEq)]
pub struct LightEstimator<S: Scalar = f64> {
    hash: UniformOnSetSeed,
    state: LightState<S>,
}

impl<S: Scalar> LightEstimator<S> {
    pub fn new<R: Rng + ?Sized>(state: LightState<S>, rng: &mut R) -> Result<Self> {
        let z = state.buckets().max(2);
        let hash = UniformOnSetSeed::random(z, state.buckets().max(2) as u64, 2, rng)?;
        Ok(Self { hash, state })
    }

    pub fn bucket_of(&self, index: u64) -> u64 {
        self.hash.eval(index) % self.state.buckets() as u64
    }

    pub fn update(&mut self, u: StreamUpdate) {
        let b = self.bucket_of(u.index);
        self.state.update_routed(u.index, b, u.delta);
    }

    pub fn state(&self) -> &LightState<S> {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut LightState<S> {
        &mut self.state
    }
}

pub fn light_update<S: Scalar>(st: &mut LightEstimator<S>, u: StreamUpdate) {
    st.update(u);
}

pub fn flush_buffer<S: Scalar>(st: &mut LightState<S>) {
    st.flush();
}

pub fn light_report<S: Scalar>(
    st: &mut LightState<S>,
    fp_tilde: f64,
    eps: f64,
    excluded: &[bool],
) -> Result<f64> {
    st.report(fp_tilde, eps, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(seed: u64, cap: usize) -> LightState<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LightState::new(1.0, 8, 16, 3, 12, cap, 32, &mut rng).unwrap()
    }

    #[test]
    fn accumulators_match_directly_recomputed_variates() {
        let mut st = state(6, 3);
        let ups = [(4u64, 1u64, 5i64), (9, 1, -2), (4, 7, 3), (12, 1, 1)];
        for &(i, b, d) in &ups {
            st.update_routed(i, b, d);
        }
        st.flush();
        for rep in 0..st.reps() {
            for row in 0..st.rows() {
                let want: f64 = ups.iter().filter(|e| e.1 == 1)
                    .map(|&(i, _, d)| st.variate(rep, 1, row, i) * d as f64).sum();
                assert!((st.sketch(rep, 1)[row] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn buffer_fills_then_flushes() {
        let mut st = state(1, 5);
        for i in 0..4 {
            st.update_routed(i + 1, i % 16, 3);
        }
        assert_eq!(st.buffered(), 4);
        assert!(st.acc.iter().all(|&v| v == 0.0));
        st.update_routed(9, 2, 1);
        assert_eq!(st.buffered(), 0);
        assert!(st.acc.iter().any(|&v| v != 0.0));
        flush_buffer(&mut st);
        assert_eq!(st.buffered(), 0);
    }

    #[test]
    fn zero_vector_reports_zero() {
        let mut st = state(2, 4);
        assert_eq!(light_report(&mut st, 1.0, 0.1, &[]).unwrap(), 0.0);
        st.update_routed(5, 3, 7);
        st.update_routed(5, 3, -7);
        assert_eq!(st.report(1.0, 0.1, &[]).unwrap(), 0.0);
    }

    #[test]
    fn all_excluded_is_an_error() {
        let mut st = state(3, 4);
        assert!(matches!(st.report(1.0, 0.1, &[true; 16]), Err(SketchError::NoLightBuckets)));
    }

    #[test]
    fn excluded_buckets_do_not_contribute() {
        let mut st = state(4, 4);
        st.update_routed(5, 3, 100);
        let mut ex = vec![false; 16];
        ex[3] = true;
        assert_eq!(st.report(1e9, 0.1, &ex).unwrap(), 0.0);
        assert!(st.report(1e9, 0.1, &[]).unwrap() > 0.0);
    }

    #[test]
    fn repeated_indices_in_one_batch() {
        let mut a = state(5, 64);
        let mut b = state(5, 64).with_mode(FlushMode::Horner);
        for d in [3, -1, 4, 1, -5] {
            a.update_routed(77, 6, d);
            b.update_routed(77, 6, d);
        }
        a.flush();
        assert_eq!(a.acc, b.acc);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn buffered_equals_horner_bit_exactly(
            ups in prop::collection::vec((1u64..200, 0u64..16, -20i64..20), 0..120),
            cap in 1usize..40,
            flush_every in 1usize..50,
            seed in any::<u64>(),
        ) {
            let mut buffered = state(seed, cap);
            let mut horner = state(seed, cap).with_mode(FlushMode::Horner);
            for (t, &(i, b, d)) in ups.iter().enumerate() {
                buffered.update_routed(i, b, d);
                horner.update_routed(i, b, d);
                if t % flush_every == 0 {
                    buffered.flush();
                }
            }
            buffered.flush();
            prop_assert_eq!(&buffered.acc, &horner.acc);
        }

        #[test]
        fn merge_and_codec(
            s1 in prop::collection::vec((1u64..200, 0u64..16, -20i64..20), 0..40),
            s2 in prop::collection::vec((1u64..200, 0u64..16, -20i64..20), 0..40),
            seed in any::<u64>(),
        ) {
            let base = state(seed, 7);
            let (mut a, mut b, mut ab) = (base.clone(), base.clone(), base);
            for &(i, k, d) in &s1 { a.update_routed(i, k, d); ab.update_routed(i, k, d); }
            for &(i, k, d) in &s2 { b.update_routed(i, k, d); ab.update_routed(i, k, d); }
            let back = LightState::<f64>::from_bytes(&b.to_bytes()).unwrap();
            prop_assert_eq!(&back, &b);
            a.merge(&b).unwrap();
            ab.flush();
            for rep in 0..ab.reps() {
                for bucket in 0..ab.buckets() {
                    for row in 0..ab.rows() {
                        let scale: f64 = s1.iter().chain(&s2)
                            .filter(|e| e.1 as usize == bucket)
                            .map(|&(i, _, d)| (ab.variate(rep, bucket, row, i) * d as f64).abs())
                            .sum();
                        let (x, y) = (a.sketch(rep, bucket)[row], ab.sketch(rep, bucket)[row]);
                        prop_assert!((x - y).abs() <= 1e-12 * scale);
                    }
                }
            }
        }
    }
}
