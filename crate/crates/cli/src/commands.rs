use std::time::Instant;

use fpsketch::generators::{planted, point_mass, turnstile, uniform, zipf_scrambled};
use fpsketch::highend::{FixedCounters, PhaseAccumulator};
use fpsketch::light::FlushMode;
use fpsketch::oracle::Oracle;
use fpsketch::pipeline::{FpEstimatorInstance, FpSketch, Instance};
use fpsketch::prg::{rng_for, sub_seed};
use fpsketch::{derive_config, FpConfig, Overrides, StreamUpdate};
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::stream::StreamFile;
use crate::CliError;

/// Keystream id for synthetic data, kept apart from the sketch streams.
const DATA_STREAM: u64 = 0xda7a;

#[derive(Clone, Debug)]
pub struct EstimateArgs {
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// Instance count; `None` uses the configured count.
    pub instances: Option<usize>,
    /// Independent repetitions, seeded `sub_seed(seed, t)`. Trial 0 uses `seed`.
    pub trials: usize,
    pub profile: String,
    pub fixed_point: bool,
    /// Compare against the exact answer when the universe is small enough.
    pub oracle: bool,
}

impl Default for EstimateArgs {
    fn default() -> Self {
        Self {
            p: 1.0,
            eps: 0.1,
            delta: 0.1,
            seed: 1,
            instances: None,
            trials: 1,
            profile: "desk".into(),
            fixed_point: false,
            oracle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub trial: usize,
    pub seed: u64,
    pub estimate: Option<f64>,
    pub failed_instances: usize,
    pub instances: usize,
    pub config_hash: String,
    pub oracle_fp: Option<f64>,
    pub relative_error: Option<f64>,
    pub ingest_seconds: f64,
    pub query_seconds: f64,
}

/// SHA-256 of the resolved parameter listing.
pub fn config_hash(cfg: &FpConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_text().as_bytes()))
}

pub fn stream_config(file: &StreamFile, p: f64, eps: f64, delta: f64, profile: &str, fixed_point: bool) -> Result<FpConfig, CliError> {
    let mut ov = Overrides::profile(profile)?;
    if fixed_point {
        ov.fixed_point = Some(true);
    }
    let h = &file.header;
    Ok(derive_config(p, eps, delta, h.n, h.m.max(1), h.big_m.max(1), &ov)?)
}

/// Runs the estimator over the stream once per trial. Fails with
/// [`CliError::AllInstancesFailed`] if any trial had no surviving instance,
/// after every trial has run; the records are returned either way.
pub fn estimate(file: &StreamFile, args: &EstimateArgs) -> (Vec<EstimateRecord>, Result<(), CliError>) {
    let cfg = match stream_config(file, args.p, args.eps, args.delta, &args.profile, args.fixed_point) {
        Ok(c) => c,
        Err(e) => return (Vec::new(), Err(e)),
    };
    let oracle_fp = if args.oracle {
        Oracle::from_updates(file.header.n, file.updates.iter().copied()).ok().map(|o| o.fp(args.p))
    } else {
        None
    };
    let mut out = Vec::new();
    let mut status = Ok(());
    for trial in 0..args.trials {
        let seed = if trial == 0 { args.seed } else { sub_seed(args.seed, trial as u64) };
        let rec = if cfg.fixed_point {
            run_once::<FixedCounters>(file, &cfg, seed, args.instances)
        } else {
            run_once::<fpsketch::highend::ComplexCounters<f64>>(file, &cfg, seed, args.instances)
        };
        match rec {
            Ok(mut r) => {
                r.trial = trial;
                r.oracle_fp = oracle_fp;
                r.relative_error = match (r.estimate, oracle_fp) {
                    (Some(e), Some(f)) if f > 0.0 => Some((e - f).abs() / f),
                    (Some(e), Some(_)) => Some(if e == 0.0 { 0.0 } else { f64::INFINITY }),
                    _ => None,
                };
                if r.estimate.is_none() {
                    status = Err(CliError::AllInstancesFailed);
                }
                out.push(r);
            }
            Err(e) => return (out, Err(e)),
        }
    }
    (out, status)
}

fn run_once<A: PhaseAccumulator>(
    file: &StreamFile,
    cfg: &FpConfig,
    seed: u64,
    instances: Option<usize>,
) -> Result<EstimateRecord, CliError> {
    let count = instances.unwrap_or(cfg.instances);
    let mut sk: FpSketch<f64, A> = FpSketch::with_instances(cfg, seed, count)?;
    let t = Instant::now();
    for &u in &file.updates {
        sk.update(u)?;
    }
    let ingest_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (estimate, failed) = match sk.query() {
        Ok(m) => (Some(m.estimate), m.failed),
        Err(fpsketch::SketchError::AllInstancesFailed) => (None, count),
        Err(e) => return Err(e.into()),
    };
    Ok(EstimateRecord {
        trial: 0,
        seed,
        estimate,
        failed_instances: failed,
        instances: count,
        config_hash: config_hash(cfg),
        oracle_fp: None,
        relative_error: None,
        ingest_seconds,
        query_seconds: t.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeavyItem {
    pub index: u64,
    pub sign: i64,
    pub value: i64,
    /// `|x_i|^p / F_p`.
    pub share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub n: u64,
    pub p: f64,
    pub fp: f64,
    pub support: usize,
    pub phi: Option<f64>,
    pub heavy: Vec<HeavyItem>,
    /// Nonzero entries of `x`, when requested.
    pub x: Option<Vec<(u64, i64)>>,
    /// Nonzero entries of the reduced vector of instance 0, when requested.
    pub y: Option<Vec<(u64, i64)>>,
}

/// Exact answers. `reduced` carries the estimator parameters used to build
/// the reduction whose image `y` is reported.
pub fn oracle(
    file: &StreamFile,
    p: f64,
    phi: Option<f64>,
    with_x: bool,
    reduced: Option<&EstimateArgs>,
) -> Result<OracleResult, CliError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(CliError::Usage(format!("p = {p} must be positive")));
    }
    let o = Oracle::from_updates(file.header.n, file.updates.iter().copied())?;
    let fp = o.fp(p);
    let heavy = match phi {
        Some(phi) => o
            .heavy(phi, p)
            .into_iter()
            .map(|(index, sign)| {
                let value = o.get(index);
                HeavyItem { index, sign, value, share: (value.abs() as f64).powf(p) / fp }
            })
            .collect(),
        None => Vec::new(),
    };
    let y = match reduced {
        Some(a) => {
            let cfg = stream_config(file, p, a.eps, a.delta, &a.profile, false)?;
            let inst = Instance::new(&cfg, sub_seed(a.seed, 0))?;
            Some(o.reduced(inst.reduction()).into_iter().collect())
        }
        None => None,
    };
    Ok(OracleResult {
        n: o.n(),
        p,
        fp,
        support: o.support().len(),
        phi,
        heavy,
        x: with_x.then(|| o.support()),
        y,
    })
}

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub p: f64,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub n: u64,
    pub updates: usize,
    pub seed: u64,
    pub profile: String,
    /// Evaluate light-estimator polynomials per update instead of buffering.
    pub horner: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub eps: f64,
    pub p: f64,
    pub updates: usize,
    pub mean_ns: f64,
    pub p50_ns: f64,
    pub p90_ns: f64,
    pub p99_ns: f64,
    pub estimate: Option<f64>,
}

/// Per-update latency of one instance at each `eps`, on one fixed random
/// stream. Returns the rows and the fitted exponent of mean latency in
/// `1/eps` (needs two or more rows).
pub fn bench(args: &BenchArgs) -> Result<(Vec<BenchRow>, Option<f64>), CliError> {
    let mut rng = rng_for(args.seed, DATA_STREAM);
    let stream: Vec<StreamUpdate> = (0..args.updates)
        .map(|_| StreamUpdate::new(rng.gen_range(1..=args.n.max(1)), rng.gen_range(-100..=100)))
        .collect();
    let mut rows = Vec::new();
    for &eps in &args.eps {
        let ov = Overrides::profile(&args.profile)?;
        let cfg = derive_config(args.p, eps, args.delta, args.n.max(1), args.updates.max(1) as u64, 100, &ov)?;
        cfg.check_state_size()?;
        let mut inst: FpEstimatorInstance = Instance::new(&cfg, args.seed)?;
        if args.horner {
            inst = inst.with_light_mode(FlushMode::Horner);
        }
        let mut lat = Vec::with_capacity(stream.len());
        for &u in &stream {
            let t = Instant::now();
            inst.update(u);
            lat.push(t.elapsed().as_nanos() as f64);
        }
        let estimate = inst.query()?.ok();
        let mean = if lat.is_empty() { 0.0 } else { lat.iter().sum::<f64>() / lat.len() as f64 };
        lat.sort_by(f64::total_cmp);
        let q = |f: f64| if lat.is_empty() { 0.0 } else { lat[((lat.len() - 1) as f64 * f).round() as usize] };
        rows.push(BenchRow {
            eps,
            p: args.p,
            updates: stream.len(),
            mean_ns: mean,
            p50_ns: q(0.5),
            p90_ns: q(0.9),
            p99_ns: q(0.99),
            estimate,
        });
    }
    Ok((rows.clone(), fit_exponent(&rows)))
}

/// Least-squares slope of `ln mean` against `ln(1/eps)`.
fn fit_exponent(rows: &[BenchRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.eps).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_ns.max(1.0).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if den == 0.0 {
        return None;
    }
    Some(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / den)
}

#[derive(Clone, Debug)]
pub struct GenArgs {
    /// `zipf`, `uniform`, `point` or `planted`.
    pub kind: String,
    pub n: u64,
    /// Approximate number of updates.
    pub m: usize,
    pub seed: u64,
    pub max_delta: i64,
    pub theta: f64,
    pub scale: f64,
    pub heavy: usize,
    pub heavy_value: i64,
    pub light: usize,
    pub light_max: i64,
}

impl Default for GenArgs {
    fn default() -> Self {
        Self {
            kind: "zipf".into(),
            n: 10_000,
            m: 100_000,
            seed: 1,
            max_delta: 100,
            theta: 1.1,
            scale: 1000.0,
            heavy: 5,
            heavy_value: 3000,
            light: 2000,
            light_max: 50,
        }
    }
}

/// A turnstile stream realizing one of the synthetic vectors.
pub fn generate(args: &GenArgs) -> Result<StreamFile, CliError> {
    if args.n == 0 || args.max_delta <= 0 {
        return Err(CliError::Usage("n and max-delta must be positive".into()));
    }
    let mut rng = rng_for(args.seed, DATA_STREAM);
    let x = match args.kind.as_str() {
        "zipf" => zipf_scrambled(args.n, args.theta, args.scale, &mut rng),
        "uniform" => uniform(args.n, 1),
        "point" => point_mass(rng.gen_range(1..=args.n), args.heavy_value),
        "planted" => {
            if (args.heavy + args.light) as u64 > args.n {
                return Err(CliError::Usage("heavy + light exceeds n".into()));
            }
            planted(args.n, args.heavy, args.heavy_value, args.light, args.light_max, &mut rng)
        }
        other => return Err(CliError::Usage(format!("unknown generator {other:?}"))),
    };
    let updates = turnstile(&x, args.n, args.m, args.max_delta, &mut rng);
    Ok(StreamFile::new(args.n, updates))
}
