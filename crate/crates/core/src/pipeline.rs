//! The full estimator: universe reduction, heavy list, HighEnd on the
//! reduced vector, averaged light estimates, and a median over instances.

use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::config::{FpConfig, StreamUpdate};
use crate::error::{Result, SketchError};
use crate::fingerprint::ZeroFingerprint;
use crate::fphh::{FpHh, HeavyReport};
use crate::gme::FpEstBox;
use crate::hashing::{PolyHashSeed, UniformOnSetSeed};
use crate::highend::{ComplexCounters, FixedCounters, HighEndFailure, HighEndSketch, PhaseAccumulator};
use crate::light::{FlushMode, LightState};
use crate::prg::{rng_for, stream, sub_seed};
use crate::scalar::Scalar;

/// `h1: [n] -> [N]` and `sigma: [n] -> {-1, 1}`, plus the light bucket map
/// `h2: [N] -> [R]`.
///
/// The reduced vector is `y_{h1(j) + 1} += sigma(j) x_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniverseReduction {
    pub h1: UniformOnSetSeed,
    pub sigma: PolyHashSeed,
    pub h2: PolyHashSeed,
}

impl UniverseReduction {
    pub fn new<R: Rng + ?Sized>(n_reduced: u64, z: usize, sigma_k: usize, light_buckets: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            h1: UniformOnSetSeed::random(z.max(2), n_reduced.max(2), 2, rng)?,
            sigma: PolyHashSeed::random(sigma_k, crate::field::MERSENNE_61, rng)?,
            h2: PolyHashSeed::random(z.max(2), light_buckets as u64, rng)?,
        })
    }

    /// Reduced coordinate of `index`, in `1..=N`.
    #[inline]
    pub fn reduce(&self, index: u64) -> u64 {
        self.h1.eval(index) + 1
    }

    #[inline]
    pub fn sign(&self, index: u64) -> i64 {
        self.sigma.sign(index)
    }

    /// Light bucket of a reduced coordinate.
    #[inline]
    pub fn light_bucket(&self, reduced: u64) -> u64 {
        self.h2.eval(reduced)
    }

    /// Reduced update for `u`.
    #[inline]
    pub fn map(&self, u: StreamUpdate) -> StreamUpdate {
        StreamUpdate::new(self.reduce(u.index), self.sign(u.index) * u.delta)
    }

    fn write_into(&self, w: &mut Writer) {
        self.h1.write_into(w);
        self.sigma.write_into(w);
        self.h2.write_into(w);
    }

    fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Self {
            h1: UniformOnSetSeed::read_from(r)?,
            sigma: PolyHashSeed::read_from(r)?,
            h2: PolyHashSeed::read_from(r)?,
        })
    }
}

/// Why an instance abstained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceFailure {
    HighEnd(HighEndFailure),
    /// The heavy list excluded every light bucket.
    NoLightBuckets,
}

impl std::fmt::Display for InstanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::HighEnd(e) => write!(f, "HighEnd failed: {e}"),
            Self::NoLightBuckets => write!(f, "no light buckets left"),
        }
    }
}

/// A heavy coordinate of the reduced vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeavyEntry {
    /// Reduced coordinate in `1..=N`.
    pub index: u64,
    pub sign: i64,
    pub mag_p: f64,
}

/// The heavy list `L'` and what went into it.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct HeavyList {
    pub entries: Vec<HeavyEntry>,
    /// Set when more than `2 / alpha` entries passed and the smallest were dropped.
    pub truncated: bool,
    pub report: HeavyReport,
}

/// Everything a query computed.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryDetails {
    pub outcome: std::result::Result<f64, InstanceFailure>,
    pub fp_tilde: f64,
    pub heavy: HeavyList,
    pub psi: Option<f64>,
    pub light: Option<f64>,
    pub zero: bool,
}

/// Scalars an instance needs at query time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceParams {
    pub p: f64,
    pub eps: f64,
    pub eps_balance: f64,
    pub alpha: f64,
    pub phi: f64,
}

/// One independent copy of the estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct FpEstimatorInstance<S: Scalar = f64, A: PhaseAccumulator = ComplexCounters<f64>> {
    params: InstanceParams,
    fingerprint: ZeroFingerprint,
    fpest: FpEstBox<S>,
    reduction: UniverseReduction,
    highend: HighEndSketch<A>,
    fphh: FpHh<S>,
    light: LightState<S>,
}

impl<S: Scalar, A: PhaseAccumulator> FpEstimatorInstance<S, A> {
    /// Builds an instance whose every seed derives from `seed`.
    pub fn new(cfg: &FpConfig, seed: u64) -> Result<Self> {
        let params = InstanceParams {
            p: cfg.p,
            eps: cfg.eps,
            eps_balance: cfg.eps_balance,
            alpha: cfg.alpha,
            phi: cfg.phi_hh,
        };
        let fingerprint = ZeroFingerprint::new(&mut rng_for(seed, stream::FINGERPRINT));
        let fpest = FpEstBox::new(
            cfg.p,
            cfg.box_bank,
            cfg.box_rows,
            cfg.k_box,
            cfg.precision_bits,
            &mut rng_for(seed, stream::FPEST),
        )?;
        let reduction = UniverseReduction::new(
            cfg.n_reduced,
            cfg.r_light,
            cfg.sigma_k,
            cfg.r_light,
            &mut rng_for(seed, stream::REDUCTION),
        )?;
        let highend = HighEndSketch::from_config(cfg, &mut rng_for(seed, stream::HIGHEND))?;
        let fphh = FpHh::from_config(cfg, &mut rng_for(seed, stream::FPHH))?;
        let light = LightState::new(
            cfg.p,
            cfg.gme_rows,
            cfg.r_light,
            cfg.reps_light,
            cfg.k_wise,
            cfg.buffer,
            cfg.precision_bits,
            &mut rng_for(seed, stream::LIGHT),
        )?
        .with_crossover(cfg.crossover);
        Ok(Self { params, fingerprint, fpest, reduction, highend, fphh, light })
    }

    /// Switches the light estimator between buffered and per-update evaluation.
    pub fn with_light_mode(mut self, mode: FlushMode) -> Self {
        self.light.flush();
        Self { light: self.light.with_mode(mode), ..self }
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn reduction(&self) -> &UniverseReduction {
        &self.reduction
    }

    pub fn highend(&self) -> &HighEndSketch<A> {
        &self.highend
    }

    pub fn fphh(&self) -> &FpHh<S> {
        &self.fphh
    }

    pub fn light(&self) -> &LightState<S> {
        &self.light
    }

    pub fn fingerprint(&self) -> &ZeroFingerprint {
        &self.fingerprint
    }

    pub fn fpest(&self) -> &FpEstBox<S> {
        &self.fpest
    }

    pub fn update(&mut self, u: StreamUpdate) {
        self.fingerprint.update(u);
        self.fpest.update(u);
        let y = self.reduction.map(u);
        self.highend.update(y);
        self.fphh.update(y);
        self.light.update_routed(u.index, self.reduction.light_bucket(y.index), u.delta);
    }

    /// Adds a batch of updates. Same final state as feeding them one by one,
    /// up to floating-point summation order.
    pub fn ingest(&mut self, entries: &[(u64, i64)]) {
        if entries.is_empty() {
            return;
        }
        for &(i, d) in entries {
            self.fingerprint.update(StreamUpdate::new(i, d));
        }
        self.fpest.ingest(entries);
        let mut reduced: Vec<(u64, i64)> = entries
            .iter()
            .map(|&(i, d)| {
                let y = self.reduction.map(StreamUpdate::new(i, d));
                (y.index, y.delta)
            })
            .collect();
        for (&(i, d), &(r, _)) in entries.iter().zip(&reduced) {
            self.light.update_routed(i, self.reduction.light_bucket(r), d);
        }
        reduced.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(u64, i64)> = Vec::with_capacity(reduced.len());
        for (i, d) in reduced {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += d,
                _ => merged.push((i, d)),
            }
        }
        merged.retain(|e| e.1 != 0);
        for &(i, d) in &merged {
            self.highend.update(StreamUpdate::new(i, d));
        }
        self.fphh.ingest(&merged);
    }

    /// `L'`: heavy-hitter reports with `mag_p >= (2 eps_b^2 / 7) F`, at most
    /// `2 / alpha` of them, largest first.
    pub fn build_heavy_list(&self) -> HeavyList {
        let fp_tilde = self.fpest.estimate();
        let report = self.fphh.report(self.params.phi);
        let cut = 2.0 * self.params.eps_balance * self.params.eps_balance / 7.0 * fp_tilde;
        let mut entries: Vec<HeavyEntry> = report
            .records
            .iter()
            .filter(|r| r.mag_p >= cut)
            .map(|r| HeavyEntry { index: r.index, sign: r.sign, mag_p: r.mag_p })
            .collect();
        entries.sort_by(|a, b| b.mag_p.total_cmp(&a.mag_p).then(a.index.cmp(&b.index)));
        let cap = (2.0 / self.params.alpha).floor() as usize;
        let truncated = entries.len() > cap;
        entries.truncate(cap);
        HeavyList { entries, truncated, report }
    }

    /// `Psi + Phi'`, or zero for the zero vector.
    pub fn query_details(&mut self) -> Result<QueryDetails> {
        let fp_tilde = self.fpest.estimate();
        if self.fingerprint.is_zero() {
            return Ok(QueryDetails {
                outcome: Ok(0.0),
                fp_tilde,
                heavy: HeavyList::default(),
                psi: None,
                light: None,
                zero: true,
            });
        }
        let heavy = self.build_heavy_list();
        let mut details = QueryDetails { outcome: Ok(0.0), fp_tilde, heavy, psi: None, light: None, zero: false };
        let ids: Vec<u64> = details.heavy.entries.iter().map(|e| e.index).collect();
        let table = match self.highend.build_isolation(&ids)? {
            Ok(t) => t,
            Err(f) => {
                details.outcome = Err(InstanceFailure::HighEnd(f));
                return Ok(details);
            }
        };
        let signed: Vec<(u64, i64)> = details.heavy.entries.iter().map(|e| (e.index, e.sign)).collect();
        let psi = match self.highend.estimate(&table, &signed) {
            Ok(v) => v,
            Err(f) => {
                details.outcome = Err(InstanceFailure::HighEnd(f));
                return Ok(details);
            }
        };
        details.psi = Some(psi);
        let mut excluded = vec![false; self.light.buckets()];
        for &w in &ids {
            excluded[self.reduction.light_bucket(w) as usize] = true;
        }
        match self.light.report(fp_tilde, self.params.eps, &excluded) {
            Ok(l) => {
                details.light = Some(l);
                details.outcome = Ok(psi + l);
            }
            Err(SketchError::NoLightBuckets) => details.outcome = Err(InstanceFailure::NoLightBuckets),
            Err(e) => return Err(e),
        }
        Ok(details)
    }

    pub fn query(&mut self) -> Result<std::result::Result<f64, InstanceFailure>> {
        Ok(self.query_details()?.outcome)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.reduction != other.reduction || self.params != other.params {
            return Err(SketchError::Incompatible("instances were built from different seeds".into()));
        }
        self.fingerprint.merge(&other.fingerprint)?;
        self.fpest.merge(&other.fpest)?;
        self.highend.merge(&other.highend)?;
        self.fphh.merge(&other.fphh)?;
        self.light.merge(&other.light)
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        let p = &self.params;
        for v in [p.p, p.eps, p.eps_balance, p.alpha, p.phi] {
            w.f64(v);
        }
        self.fingerprint.write_into(w);
        self.fpest.write_into(w);
        self.reduction.write_into(w);
        self.highend.write_into(w);
        self.fphh.write_into(w);
        self.light.write_into(w);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let params = InstanceParams { p: r.f64()?, eps: r.f64()?, eps_balance: r.f64()?, alpha: r.f64()?, phi: r.f64()? };
        Ok(Self {
            params,
            fingerprint: ZeroFingerprint::read_from(r)?,
            fpest: FpEstBox::read_from(r)?,
            reduction: UniverseReduction::read_from(r)?,
            highend: HighEndSketch::read_from(r)?,
            fphh: FpHh::read_from(r)?,
            light: LightState::read_from(r)?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Instance);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Instance)?;
        let s = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(s)
    }
}

pub fn pipeline_update<S: Scalar, A: PhaseAccumulator>(inst: &mut FpEstimatorInstance<S, A>, u: StreamUpdate) {
    inst.update(u);
}

pub fn build_heavy_list<S: Scalar, A: PhaseAccumulator>(inst: &FpEstimatorInstance<S, A>) -> HeavyList {
    inst.build_heavy_list()
}

pub fn pipeline_query<S: Scalar, A: PhaseAccumulator>(
    inst: &mut FpEstimatorInstance<S, A>,
) -> Result<std::result::Result<f64, InstanceFailure>> {
    inst.query()
}

/// Median of the instance outputs that did not fail.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianResult {
    pub estimate: f64,
    pub failed: usize,
    pub outputs: Vec<std::result::Result<f64, InstanceFailure>>,
}

/// Median over non-failing outcomes; an even count takes the mean of the two
/// middle values.
pub fn median_of_outcomes(outcomes: Vec<std::result::Result<f64, InstanceFailure>>) -> Result<MedianResult> {
    let mut ok: Vec<f64> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let failed = outcomes.len() - ok.len();
    let estimate = crate::stats::median(&mut ok).ok_or(SketchError::AllInstancesFailed)?;
    Ok(MedianResult { estimate, failed, outputs: outcomes })
}

pub fn median_query<S: Scalar, A: PhaseAccumulator>(instances: &mut [FpEstimatorInstance<S, A>]) -> Result<MedianResult> {
    let outcomes = instances.iter_mut().map(|i| i.query()).collect::<Result<Vec<_>>>()?;
    median_of_outcomes(outcomes)
}

/// The amplified estimator: an odd number of independent instances.
#[derive(Clone, Debug)]
pub struct FpSketch<S: Scalar = f64, A: PhaseAccumulator = ComplexCounters<f64>> {
    config: FpConfig,
    instances: Vec<FpEstimatorInstance<S, A>>,
}

impl<S: Scalar, A: PhaseAccumulator> FpSketch<S, A> {
    /// `cfg.instances` copies keyed by `sub_seed(seed, i)`.
    pub fn new(cfg: &FpConfig, seed: u64) -> Result<Self> {
        Self::with_instances(cfg, seed, cfg.instances)
    }

    pub fn with_instances(cfg: &FpConfig, seed: u64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(SketchError::InvalidParameter("need at least one instance".into()));
        }
        cfg.check_state_size()?;
        let instances = (0..count)
            .map(|i| FpEstimatorInstance::new(cfg, sub_seed(seed, i as u64)))
            .collect::<Result<_>>()?;
        Ok(Self { config: cfg.clone(), instances })
    }

    pub fn config(&self) -> &FpConfig {
        &self.config
    }

    pub fn instances(&self) -> &[FpEstimatorInstance<S, A>] {
        &self.instances
    }

    pub fn instances_mut(&mut self) -> &mut [FpEstimatorInstance<S, A>] {
        &mut self.instances
    }

    /// Checks the update against the configured bounds, then applies it.
    pub fn update(&mut self, u: StreamUpdate) -> Result<()> {
        u.validate(self.config.n, self.config.big_m)?;
        for inst in &mut self.instances {
            inst.update(u);
        }
        Ok(())
    }

    pub fn ingest(&mut self, entries: &[(u64, i64)]) -> Result<()> {
        for &(i, d) in entries {
            StreamUpdate::new(i, d).validate(self.config.n, self.config.big_m)?;
        }
        for inst in &mut self.instances {
            inst.ingest(entries);
        }
        Ok(())
    }

    pub fn query(&mut self) -> Result<MedianResult> {
        median_query(&mut self.instances)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.instances.len() != other.instances.len() {
            return Err(SketchError::Incompatible("instance counts differ".into()));
        }
        for (a, b) in self.instances.iter_mut().zip(&other.instances) {
            a.merge(b)?;
        }
        Ok(())
    }
}

/// Double-precision estimator instance.
pub type Instance = FpEstimatorInstance<f64, ComplexCounters<f64>>;
/// Instance whose HighEnd counters are fixed point.
pub type FixedInstance = FpEstimatorInstance<f64, FixedCounters>;
