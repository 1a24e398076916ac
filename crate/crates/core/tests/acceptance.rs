//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails, except those listed in `KNOWN_UNATTAINABLE`,
//! which are reported as FAIL but do not affect the exit status.
//!
//! `ACCEPTANCE=1,4` runs a subset.

use std::time::Instant;

use fpsketch::config::default_r;
use fpsketch::field::{Fp, SmallPrime, F61, M61};
use fpsketch::fphh::{FpHh, FpHhShape, SignSketch};
use fpsketch::generators::{planted, turnstile, uniform, zipf, zipf_scrambled};
use fpsketch::gme::{FpEstBox, GmeSketch};
use fpsketch::hashing::{PolyHashSeed, PowerTable};
use fpsketch::highend::{FixedCounters, HighEnd, HighEndFixed, HighEndSketch, PhaseAccumulator};
use fpsketch::light::{FlushMode, LightState};
use fpsketch::oracle::Oracle;
use fpsketch::pipeline::{median_of_outcomes, FixedInstance, FpEstimatorInstance, Instance};
use fpsketch::polyeval::{multipoint_eval, ProductTree};
use fpsketch::prg::{rng_for, sub_seed};
use fpsketch::stable::stable_abs_moment;
use fpsketch::stats::{mean_sd, three_sigma};
use fpsketch::{derive_config, FpConfig, Overrides, Scalar, StreamUpdate};
use rand::Rng;

/// Criteria whose literal statement cannot hold for any implementation.
/// 4: seventeen equally likely field values cannot be split evenly over four
/// phases, so the phase moments are 1/289 rather than 0 (checked exactly).
const KNOWN_UNATTAINABLE: &[u32] = &[4];

const SEED: u64 = 0x00f0_5eed;

// Criterion 1 and 2.
const GME_EPS: f64 = 0.05;
const GME_SAMPLES: usize = 100_000;
const GME_SECOND_MOMENT_BOUND: f64 = 20.0;
/// Largest relative gap allowed between a sampled second moment and its
/// closed form (sampling error of est^2 included as 3 SE on top).
const GME_SECOND_MOMENT_SPREAD: f64 = 0.10;
// Criterion 3.
const MULTIPOINT_PAIRS: usize = 1000;
const MULTIPOINT_MAX_DEGREE: usize = 1024;
// Criterion 5.
const HIGHEND_TRIALS: usize = 1000;
const HIGHEND_C: f64 = 1.0;
// Criterion 6.
const FPHH_TRIALS: usize = 500;
const FPHH_PHI: f64 = 0.05;
const FPHH_DELTA: f64 = 0.1;
const FPHH_TOL: f64 = 0.05;
// Criterion 7.
const E2E_GROUPS: usize = 33;
const E2E_GROUP: usize = 9;
const E2E_C: f64 = 1.0;
const E2E_EPS: f64 = 0.1;
// Criterion 8.
const MERGE_SPLITS: usize = 100;
const MERGE_REL: f64 = 1e-9;
// Criterion 9.
const TREND_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.02];
const TREND_UPDATES: usize = 20_000;
const TREND_MAX_RATIO: f64 = 10.0;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let want = |id: u32| only.as_ref().is_none_or(|v| v.contains(&id));

    let mut battery = None;
    let mut results = Vec::new();
    let mut run = |id: u32, f: &mut dyn FnMut() -> Outcome| {
        if want(id) {
            let t = Instant::now();
            let o = f();
            let status = if o.pass {
                "PASS"
            } else if KNOWN_UNATTAINABLE.contains(&o.id) {
                "FAIL (known unattainable)"
            } else {
                "FAIL"
            };
            println!("acceptance {} {}: {} [{:.1}s] {}", o.id, o.name, status, t.elapsed().as_secs_f64(), o.detail);
            results.push(o);
        }
    };
    run(1, &mut || criterion_1(gme_battery(&mut battery)));
    run(2, &mut || criterion_2(gme_battery(&mut battery)));
    run(3, &mut criterion_3);
    run(4, &mut criterion_4);
    run(5, &mut criterion_5);
    run(6, &mut criterion_6);
    run(7, &mut criterion_7);
    run(8, &mut criterion_8);
    run(9, &mut criterion_9);

    let blocking: Vec<u32> = results
        .iter()
        .filter(|o| !o.pass && !KNOWN_UNATTAINABLE.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let passed = results.iter().filter(|o| o.pass).count();
    println!("acceptance summary: {passed}/{} PASS", results.len());
    if !blocking.is_empty() {
        println!("acceptance failing criteria: {blocking:?}");
        std::process::exit(1);
    }
}

fn ok(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, detail }
}

fn desk(p: f64, eps: f64, delta: f64, n: u64) -> FpConfig {
    derive_config(p, eps, delta, n, 1 << 24, 1 << 20, &Overrides::desk()).unwrap()
}

// ---------------------------------------------------------------------------
// 1, 2: GME mean and second moment.

struct GmeRun {
    p: f64,
    vector: &'static str,
    rows: usize,
    k: usize,
    fp: f64,
    mean: f64,
    se: f64,
    m2: f64,
    m2_se: f64,
    m2_exact: f64,
    secs: f64,
}

fn gme_battery(cache: &mut Option<Vec<GmeRun>>) -> &Vec<GmeRun> {
    cache.get_or_insert_with(|| {
        let mut out = Vec::new();
        let vectors: [(&'static str, Vec<(u64, i64)>); 3] = [
            ("point-mass", vec![(17, 5)]),
            ("uniform-100", uniform(100, 1)),
            ("zipf1.1-1000", zipf(1000, 1.1, 1000.0)),
        ];
        for (pi, p) in [0.5, 1.0, 1.5].into_iter().enumerate() {
            let cfg = desk(p, GME_EPS, 0.1, 1000);
            let (rows, k) = (cfg.gme_rows, cfg.k_wise);
            for (vi, (name, x)) in vectors.iter().enumerate() {
                let t = Instant::now();
                let fp = Oracle::from_vector(1000, x).unwrap().fp(p);
                let keys: Vec<u64> = x.iter().map(|e| e.0).collect();
                let deltas: Vec<i64> = x.iter().map(|e| e.1).collect();
                let table = PowerTable::new(&keys, k);
                let mut rng = rng_for(SEED, (pi * 3 + vi) as u64);
                let mut est = Vec::with_capacity(GME_SAMPLES);
                for _ in 0..GME_SAMPLES {
                    let mut g: GmeSketch<f64> = GmeSketch::new(p, rows, k, cfg.precision_bits, &mut rng).unwrap();
                    g.ingest_table(&table, &deltas);
                    est.push(g.raw_estimate());
                }
                let (mean, sd) = mean_sd(&est);
                let sq: Vec<f64> = est.iter().map(|e| e * e / (fp * fp)).collect();
                let (m2, m2_sd) = mean_sd(&sq);
                let t_rows = rows as f64;
                let m2_exact = stable_abs_moment(p, 2.0 * p / t_rows).unwrap().powf(t_rows)
                    / stable_abs_moment(p, p / t_rows).unwrap().powf(2.0 * t_rows);
                out.push(GmeRun {
                    p,
                    vector: name,
                    rows,
                    k,
                    fp,
                    mean,
                    se: sd / (GME_SAMPLES as f64).sqrt(),
                    m2,
                    m2_se: m2_sd / (GME_SAMPLES as f64).sqrt(),
                    m2_exact,
                    secs: t.elapsed().as_secs_f64(),
                });
            }
        }
        out
    })
}

fn criterion_1(runs: &[GmeRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let slack = GME_EPS * r.fp + 3.0 * r.se;
        let good = (r.mean - r.fp).abs() <= slack && r.secs <= 300.0;
        pass &= good;
        parts.push(format!(
            "p={} {} (t={}, k={}): mean/F={:.4} |dev|/F={:.4} <= {:.4} {:.0}s {}",
            r.p,
            r.vector,
            r.rows,
            r.k,
            r.mean / r.fp,
            (r.mean - r.fp).abs() / r.fp,
            slack / r.fp,
            r.secs,
            if good { "ok" } else { "BAD" }
        ));
    }
    ok(1, "gme_unbiasedness", pass, format!("{} samples each; {}", GME_SAMPLES, parts.join("; ")))
}

fn criterion_2(runs: &[GmeRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [0.5, 1.0, 1.5] {
        let group: Vec<&GmeRun> = runs.iter().filter(|r| r.p == p).collect();
        let lo = group.iter().map(|r| r.m2).fold(f64::INFINITY, f64::min);
        let hi = group.iter().map(|r| r.m2).fold(0.0, f64::max);
        for r in &group {
            let gap = (r.m2 - r.m2_exact).abs();
            let good = r.m2 <= GME_SECOND_MOMENT_BOUND && gap <= GME_SECOND_MOMENT_SPREAD * r.m2_exact + 3.0 * r.m2_se;
            pass &= good;
            if !good {
                parts.push(format!("p={} {} off: {:.4} vs {:.4}", p, r.vector, r.m2, r.m2_exact));
            }
        }
        parts.push(format!(
            "p={} t={}: E[est^2]/F^2 in [{:.4}, {:.4}], closed form {:.4}",
            p, group[0].rows, lo, hi, group[0].m2_exact
        ));
    }
    ok(2, "gme_second_moment", pass, format!("bound {GME_SECOND_MOMENT_BOUND}; {}", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 3: multipoint evaluation against Horner.

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut rng = rng_for(SEED, 300);
    let mut mismatches = 0usize;
    let mut max_degree = 0;
    for _ in 0..MULTIPOINT_PAIRS {
        let degree = rng.gen_range(0..=MULTIPOINT_MAX_DEGREE);
        max_degree = max_degree.max(degree);
        let m = rng.gen_range(1..=MULTIPOINT_MAX_DEGREE);
        let coeffs: Vec<F61> = (0..=degree).map(|_| F61::new(rng.gen())).collect();
        let points: Vec<F61> = (0..m)
            .map(|_| if rng.gen_bool(0.05) { F61::new(rng.gen_range(0..8)) } else { F61::new(rng.gen()) })
            .collect();
        let tree = ProductTree::new(&points);
        let fast = multipoint_eval(&coeffs, &tree);
        let seed = PolyHashSeed::<M61>::from_coeffs(coeffs, fpsketch::field::MERSENNE_61).unwrap();
        mismatches += points.iter().zip(&fast).filter(|(x, v)| seed.eval_field(x.value()) != **v).count();
    }
    let secs = t.elapsed().as_secs_f64();
    ok(
        3,
        "multipoint_exactness",
        mismatches == 0 && secs <= 30.0,
        format!("{MULTIPOINT_PAIRS} pairs, degrees up to {max_degree}: {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------------------
// 4: exhaustive phase moments over F_17 with r = 4.

/// Sums `omega^{k (g(v) - g(w))}` over every seed `g` of a `deg`-coefficient
/// polynomial family over F_17, phases reduced mod 4. Returns the Gaussian
/// integer `(re, im)` and the seed count.
fn phase_sum(k: u32, v: u64, w: u64, coeffs: usize) -> ((i64, i64), i64) {
    let q = 17u64;
    let total = q.pow(coeffs as u32);
    let mut counts = [0i64; 4];
    for code in 0..total {
        let mut c = Vec::with_capacity(coeffs);
        let mut rest = code;
        for _ in 0..coeffs {
            c.push(Fp::<SmallPrime<17>>::new(rest % q));
            rest /= q;
        }
        let g = PolyHashSeed::<SmallPrime<17>>::from_coeffs(c, 4).unwrap();
        let d = (g.eval(v) + 4 - g.eval(w)) % 4;
        counts[((k as u64 * d) % 4) as usize] += 1;
    }
    ((counts[0] - counts[2], counts[1] - counts[3]), total as i64)
}

fn criterion_4() -> Outcome {
    // y_w = sign(x_w) omega^{-g(w)} D - |x_w| = omega^{g(v) - g(w)} x_v for one
    // light coordinate v sharing w's bucket.
    let (w, v, x_v) = (3u64, 11u64, 5i64);
    let mut literal_zero = true;
    let mut predicted = true;
    let mut parts = Vec::new();
    for k in 1..=3u32 {
        let ((re, im), total) = phase_sum(k, v, w, 4);
        let x_k = x_v.pow(k);
        literal_zero &= re == 0 && im == 0;
        // Pairwise independence gives E = |E omega^{k g}|^2 = |mu_k|^2 with
        // mu_k = (5 + 4 i^k + 4 i^{2k} + 4 i^{3k}) / 17 = 1/17 for k = 1, 2, 3.
        predicted &= im == 0 && re * 289 == total;
        parts.push(format!("E[y^{k}] = {}*{}/{} + {}i", x_k, re, total, im));
    }
    // Companion: phases exactly uniform on [4] (all 16 assignments of the two
    // keys) give zero moments.
    let mut balanced = true;
    for k in 1..=3u32 {
        let mut s = [0i64; 4];
        for gv in 0..4u32 {
            for gw in 0..4u32 {
                s[((k * (gv + 4 - gw)) % 4) as usize] += 1;
            }
        }
        balanced &= s[0] == s[2] && s[1] == s[3];
    }
    let detail = format!(
        "literal F_17 family: {} (bias matches 1/289 exactly: {}); balanced phases give 0: {}",
        parts.join(", "),
        predicted,
        balanced
    );
    if !predicted || !balanced {
        return ok(4, "phase_moments", false, format!("unexpected moments; {detail}"));
    }
    ok(4, "phase_moments", literal_zero, detail)
}

// ---------------------------------------------------------------------------
// 5: HighEnd accuracy on a planted battery.

fn criterion_5() -> Outcome {
    let (p, eps, alpha) = (1.0, 0.1, 0.02);
    let tau = 24.0;
    let t_big = (tau * f64::log2(1.0 / eps).max(f64::log2(2.0 / alpha))).ceil() as usize;
    let s = ((4.0 / alpha).ceil() as usize).max(2 * (2.0 / alpha).ceil() as usize);
    let r_h = (2.0 / alpha).log2().ceil() as usize + 6;
    let taylor = (4.0 * f64::log2(1.0 / eps)).ceil() as usize;
    let mut errs = Vec::with_capacity(HIGHEND_TRIALS);
    let mut failures = 0;
    for trial in 0..HIGHEND_TRIALS {
        let mut rng = rng_for(SEED, 500 + trial as u64);
        let x = planted(10_000, 5, 400, 500, 20, &mut rng);
        let oracle = Oracle::from_vector(10_000, &x).unwrap();
        let fp = oracle.fp(p);
        let heavy = &x[..5];
        let x_l: f64 = heavy.iter().map(|e| (e.1.abs() as f64).powf(p)).sum();
        debug_assert!(heavy.iter().all(|e| (e.1.abs() as f64).powf(p) >= alpha * fp));
        let mut sk = HighEnd::new(p, default_r(eps), t_big, s, r_h, taylor, 0, &mut rng).unwrap();
        for &(i, d) in &x {
            sk.update(StreamUpdate::new(i, d));
        }
        let ids: Vec<u64> = heavy.iter().map(|e| e.0).collect();
        let signed: Vec<(u64, i64)> = heavy.iter().map(|e| (e.0, e.1.signum())).collect();
        match sk.build_isolation(&ids).unwrap().and_then(|t| sk.estimate(&t, &signed)) {
            Ok(psi) => errs.push((psi - x_l).abs() / (eps * fp)),
            Err(_) => failures += 1,
        }
    }
    let hits = errs.iter().filter(|&&e| e < HIGHEND_C).count();
    let rate = hits as f64 / HIGHEND_TRIALS as f64;
    let need = 7.0 / 8.0 - three_sigma(7.0 / 8.0, HIGHEND_TRIALS);
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    let q875 = sorted.get((sorted.len() * 7) / 8).copied().unwrap_or(f64::NAN);
    ok(
        5,
        "highend_accuracy",
        rate >= need,
        format!(
            "T={t_big} t={} s={s} r={}: |Psi-||x_L|||<{HIGHEND_C}*eps*F in {hits}/{HIGHEND_TRIALS} = {rate:.3} >= {need:.3}; \
             failures {failures}; observed 7/8-quantile of |err|/(eps F) = {q875:.4}",
            3 * t_big,
            default_r(eps)
        ),
    )
}

// ---------------------------------------------------------------------------
// 6: heavy hitters.

fn criterion_6() -> Outcome {
    let (p, phi) = (1.0, FPHH_PHI);
    let n = 4096u64;
    let shape = FpHhShape {
        p,
        n,
        phi,
        buckets: (8.0 / phi).ceil() as usize,
        reps: 21,
        bank: 1,
        rows: 64,
        k: (7f64.powf(p)).ceil() as usize,
        cs_rows: 9,
        cs_cols: (21.0 * 2f64.powf(p) / phi).ceil() as usize,
        box_bank: 9,
        box_rows: 32,
        precision_bits: 32,
    };
    let (lo, hi) = (6.0 / 7.0 - FPHH_TOL, 9.0 / 7.0 + FPHH_TOL);
    let mut good = 0;
    let (mut missed, mut spurious, mut out_of_band, mut wrong_sign, mut reports) = (0, 0, 0, 0, 0);
    let mut worst_ratio: f64 = 1.0;
    let mut max_frontier = 0;
    for trial in 0..FPHH_TRIALS {
        let mut rng = rng_for(SEED, 600 + trial as u64);
        let mut x = planted(n, 25, 100, 100, 1, &mut rng);
        for e in &mut x[5..25] {
            e.1 = 20 * e.1.signum();
        }
        let oracle = Oracle::from_vector(n, &x).unwrap();
        let heavy = oracle.heavy(phi, p);
        let half = oracle.heavy(phi / 2.0, p);
        let mut hh: FpHh<f64> = FpHh::new(shape, &mut rng).unwrap();
        hh.ingest(&x);
        let rep = hh.report(phi);
        max_frontier = max_frontier.max(rep.frontier.iter().copied().max().unwrap_or(0));
        let mut trial_ok = true;
        for &(i, sign) in &heavy {
            if !rep.records.iter().any(|r| r.index == i) {
                missed += 1;
                trial_ok = false;
            } else if rep.records.iter().any(|r| r.index == i && r.sign != sign) {
                wrong_sign += 1;
                trial_ok = false;
            }
        }
        for r in &rep.records {
            reports += 1;
            if !half.iter().any(|h| h.0 == r.index) {
                spurious += 1;
                trial_ok = false;
            }
            let truth = (oracle.get(r.index).abs() as f64).powf(p);
            if truth > 0.0 {
                let ratio = r.mag_p / truth;
                if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
                    worst_ratio = ratio;
                }
                if ratio < lo || ratio > hi {
                    out_of_band += 1;
                    trial_ok = false;
                }
            }
        }
        good += trial_ok as usize;
    }
    let rate = good as f64 / FPHH_TRIALS as f64;
    let need = 1.0 - FPHH_DELTA - three_sigma(1.0 - FPHH_DELTA, FPHH_TRIALS);
    ok(
        6,
        "fphh_completeness_soundness",
        rate >= need,
        format!(
            "phi={phi} R={} reps={} rows={}: clean trials {good}/{FPHH_TRIALS} = {rate:.3} >= {need:.3}; \
             missed {missed}, spurious {spurious}, wrong sign {wrong_sign}, mag_p outside [{lo:.3}, {hi:.3}] {out_of_band} of {reports}; \
             worst mag ratio {worst_ratio:.3}; max frontier {max_frontier} (2*(2/phi) = {})",
            shape.buckets,
            shape.reps,
            shape.rows,
            (4.0 / phi) as usize
        ),
    )
}

// ---------------------------------------------------------------------------
// 7: end to end.

fn criterion_7() -> Outcome {
    let n = 10_000u64;
    let mut pass = true;
    let mut parts = Vec::new();
    let (mut med_hits, mut med_total) = (0usize, 0usize);
    let mut all_errs = Vec::new();
    let mut replay_gap: f64 = 0.0;
    for (pi, p) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let cfg = desk(p, E2E_EPS, 0.05, n);
        for (si, kind) in ["zipf", "planted"].into_iter().enumerate() {
            let (mut hits, mut fails, mut total, mut mhits) = (0, 0, 0, 0);
            let mut errs = Vec::new();
            for g in 0..E2E_GROUPS {
                let key = ((pi * 2 + si) * 1000 + g) as u64;
                let mut rng = rng_for(SEED, 700_000 + key);
                let x = if kind == "zipf" {
                    zipf_scrambled(n, 1.1, 1000.0, &mut rng)
                } else {
                    planted(n, 5, 3000, 2000, 50, &mut rng)
                };
                let stream = turnstile(&x, n, 100_000, 100, &mut rng);
                let oracle = Oracle::from_updates(n, stream.iter().copied()).unwrap();
                let fp = oracle.fp(p);
                let net = oracle.support();
                let mut outcomes = Vec::with_capacity(E2E_GROUP);
                for i in 0..E2E_GROUP {
                    let mut inst = Instance::new(&cfg, sub_seed(SEED, key * 16 + i as u64)).unwrap();
                    if g == 0 && i == 0 && p == 1.0 && kind == "zipf" {
                        // The sketches are linear: the compacted vector and the
                        // raw stream give the same query.
                        let mut raw = inst.clone();
                        for &u in &stream {
                            raw.update(u);
                        }
                        inst.ingest(&net);
                        if let (Ok(a), Ok(b)) = (raw.query().unwrap(), inst.query().unwrap()) {
                            replay_gap = (a - b).abs() / b.abs();
                        }
                    } else {
                        inst.ingest(&net);
                    }
                    let out = inst.query().unwrap();
                    total += 1;
                    match out {
                        Ok(v) => {
                            let e = (v - fp).abs() / (E2E_EPS * fp);
                            errs.push(e);
                            hits += (e <= E2E_C) as usize;
                        }
                        Err(_) => fails += 1,
                    }
                    outcomes.push(out);
                }
                if let Ok(m) = median_of_outcomes(outcomes) {
                    mhits += ((m.estimate - fp).abs() <= E2E_C * E2E_EPS * fp) as usize;
                }
            }
            let rate = hits as f64 / total as f64;
            let need = 2.0 / 3.0 - three_sigma(2.0 / 3.0, total);
            pass &= rate >= need;
            med_hits += mhits;
            med_total += E2E_GROUPS;
            errs.sort_by(f64::total_cmp);
            let q = errs.get(errs.len() * 2 / 3).copied().unwrap_or(f64::NAN);
            parts.push(format!(
                "p={p} {kind}: single {hits}/{total}={rate:.3}>={need:.3} (fail {fails}, 2/3-quantile c={q:.3}), median {mhits}/{E2E_GROUPS}"
            ));
            all_errs.extend(errs);
        }
    }
    let med_rate = med_hits as f64 / med_total as f64;
    let med_need = 0.95 - three_sigma(0.95, med_total);
    pass &= med_rate >= med_need && replay_gap <= 1e-9;
    ok(
        7,
        "end_to_end",
        pass,
        format!(
            "c={E2E_C}, eps={E2E_EPS}; {}; 9-instance medians {med_hits}/{med_total}={med_rate:.3}>={med_need:.3}; raw-stream replay gap {replay_gap:.2e}",
            parts.join("; ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 8: merges.

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn random_split<R: Rng>(rng: &mut R, n: u64, len: usize) -> (Vec<StreamUpdate>, Vec<StreamUpdate>) {
    let all: Vec<StreamUpdate> = (0..len).map(|_| StreamUpdate::new(rng.gen_range(1..=n), rng.gen_range(-50..=50))).collect();
    let cut = rng.gen_range(0..=len);
    (all[..cut].to_vec(), all[cut..].to_vec())
}

fn highend_cells<A: PhaseAccumulator>(h: &HighEndSketch<A>) -> Vec<f64> {
    let mut v = Vec::new();
    for j in 0..h.t_rows() {
        for b in 0..h.buckets() {
            let c = h.counter(j, b);
            v.push(c.re);
            v.push(c.im);
        }
    }
    v
}

fn fphh_cells<S: Scalar>(h: &FpHh<S>) -> Vec<f64> {
    let mut v = Vec::new();
    for level in h.top()..=h.depth() {
        for rep in 0..h.shape().reps {
            for b in 0..h.shape().buckets {
                v.extend(h.cell(level, rep, b).iter().map(|s| s.as_f64()));
            }
        }
    }
    v.extend(bank_cells(h.global()));
    v
}

fn bank_cells<S: Scalar>(b: &FpEstBox<S>) -> Vec<f64> {
    b.bank().iter().flat_map(|g| g.y().iter().map(|s| s.as_f64()).collect::<Vec<_>>()).collect()
}

fn light_cells<S: Scalar>(l: &LightState<S>) -> Vec<f64> {
    let mut l = l.clone();
    l.flush();
    let mut v = Vec::new();
    for rep in 0..l.reps() {
        for b in 0..l.buckets() {
            v.extend(l.sketch(rep, b).iter().map(|s| s.as_f64()));
        }
    }
    v
}

fn instance_gap<A: PhaseAccumulator>(a: &FpEstimatorInstance<f64, A>, b: &FpEstimatorInstance<f64, A>) -> (f64, bool) {
    let exact = a.fingerprint() == b.fingerprint() && a.fphh().signs() == b.fphh().signs();
    let gap = [
        max_rel(&bank_cells(a.fpest()), &bank_cells(b.fpest())),
        max_rel(&highend_cells(a.highend()), &highend_cells(b.highend())),
        max_rel(&fphh_cells(a.fphh()), &fphh_cells(b.fphh())),
        max_rel(&light_cells(a.light()), &light_cells(b.light())),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    (gap, exact)
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let n = 1000u64;
    let cfg = desk(1.0, 0.2, 0.1, n);
    let fixed_cfg = FpConfig { fixed_point: true, ..cfg.clone() };
    let mut worst = [0.0f64; 7];
    let mut exact_ok = true;
    let mut rng = rng_for(SEED, 800);
    for split in 0..MERGE_SPLITS {
        let len = rng.gen_range(1..300);
        let (s1, s2) = random_split(&mut rng, n, len);
        let seed = sub_seed(SEED, 8000 + split as u64);
        let mut srng = rng_for(seed, 1);

        let gme: GmeSketch<f64> = GmeSketch::new(1.0, 9, 8, 32, &mut srng).unwrap();
        let fpbox: FpEstBox<f64> = FpEstBox::new(0.7, 3, 12, 8, 32, &mut srng).unwrap();
        let light: LightState<f64> = LightState::new(1.3, 8, 16, 4, 10, 7, 32, &mut srng).unwrap();
        let he: HighEnd = HighEndSketch::new(1.0, 8, 3, 32, 6, 12, 0, &mut srng).unwrap();
        let hef: HighEndFixed = HighEndSketch::new(1.0, 8, 3, 32, 6, 12, FixedCounters::bits_for(0.2, 1 << 20, 3), &mut srng).unwrap();
        let shape = FpHhShape {
            p: 1.0, n, phi: 0.1, buckets: 40, reps: 3, bank: 2, rows: 8, k: 7,
            cs_rows: 5, cs_cols: 64, box_bank: 3, box_rows: 8, precision_bits: 32,
        };
        let hh: FpHh<f64> = FpHh::new(shape, &mut srng).unwrap();
        let cs = SignSketch::new(5, 32, &mut srng).unwrap();

        macro_rules! trio {
            ($base:expr, $upd:expr) => {{
                let (mut a, mut b, mut ab) = ($base.clone(), $base.clone(), $base);
                for &u in &s1 {
                    $upd(&mut a, u);
                    $upd(&mut ab, u);
                }
                for &u in &s2 {
                    $upd(&mut b, u);
                    $upd(&mut ab, u);
                }
                a.merge(&b).unwrap();
                (a, ab)
            }};
        }

        let (a, ab) = trio!(gme, |s: &mut GmeSketch<f64>, u| s.update(u));
        worst[0] = worst[0].max(max_rel(a.y(), ab.y()));
        let (a, ab) = trio!(fpbox, |s: &mut FpEstBox<f64>, u| s.update(u));
        worst[1] = worst[1].max(max_rel(&bank_cells(&a), &bank_cells(&ab)));
        let (a, ab) = trio!(light, |s: &mut LightState<f64>, u: StreamUpdate| s.update_routed(u.index, u.index % 16, u.delta));
        worst[2] = worst[2].max(max_rel(&light_cells(&a), &light_cells(&ab)));
        let (a, ab) = trio!(he, |s: &mut HighEnd, u| s.update(u));
        worst[3] = worst[3].max(max_rel(&highend_cells(&a), &highend_cells(&ab)));
        let (a, ab) = trio!(hef, |s: &mut HighEndFixed, u| s.update(u));
        exact_ok &= a == ab;
        let (a, ab) = trio!(hh, |s: &mut FpHh<f64>, u| s.update(u));
        worst[4] = worst[4].max(max_rel(&fphh_cells(&a), &fphh_cells(&ab)));
        exact_ok &= a.signs() == ab.signs();
        let (a, ab) = trio!(cs, |s: &mut SignSketch, u| s.update(u));
        exact_ok &= a == ab;

        if split % 10 == 0 {
            let inst = Instance::new(&cfg, seed).unwrap();
            let (a, ab) = trio!(inst, |s: &mut Instance, u| s.update(u));
            let (gap, exact) = instance_gap(&a, &ab);
            worst[5] = worst[5].max(gap);
            exact_ok &= exact;
            let inst = FixedInstance::new(&fixed_cfg, seed).unwrap();
            let (a, ab) = trio!(inst, |s: &mut FixedInstance, u| s.update(u));
            let (gap, exact) = instance_gap(&a, &ab);
            worst[6] = worst[6].max(gap);
            exact_ok &= exact && a.highend() == ab.highend();
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let names = ["gme", "fpest_box", "light", "highend", "fphh", "instance", "instance_fixed"];
    let detail: Vec<String> = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.1e}")).collect();
    ok(
        8,
        "linearity_merge",
        worst.iter().all(|&w| w <= MERGE_REL) && exact_ok && secs <= 60.0,
        format!(
            "{MERGE_SPLITS} splits (instances every 10th); max relative gap: {}; bit-exact (fixed point, CountSketch, fingerprint): {exact_ok}",
            detail.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 9: update-time trend.

fn time_updates<A: PhaseAccumulator>(mut inst: FpEstimatorInstance<f64, A>, stream: &[StreamUpdate]) -> f64 {
    let warm = stream.len() / 10;
    for &u in &stream[..warm] {
        inst.update(u);
    }
    let t = Instant::now();
    for &u in &stream[warm..] {
        inst.update(u);
    }
    let ns = t.elapsed().as_nanos() as f64 / (stream.len() - warm) as f64;
    std::hint::black_box(&inst);
    ns
}

fn criterion_9() -> Outcome {
    let n = 1u64 << 20;
    let mut rng = rng_for(SEED, 900);
    let stream: Vec<StreamUpdate> =
        (0..TREND_UPDATES).map(|_| StreamUpdate::new(rng.gen_range(1..=n), rng.gen_range(-100..=100))).collect();
    let mut buffered = Vec::new();
    let mut horner = Vec::new();
    for eps in TREND_EPS {
        let cfg = desk(1.0, eps, 0.1, n);
        let inst = Instance::new(&cfg, SEED).unwrap();
        buffered.push(time_updates(inst.clone(), &stream));
        horner.push(time_updates(inst.with_light_mode(FlushMode::Horner), &stream));
    }
    let ratio = buffered[3] / buffered[0];
    let base_ratio = horner[3] / horner[0];
    // Slope of log latency against log(1/eps) (a polynomial exponent) and
    // against log log(1/eps) (a polylog exponent).
    let fit = |ys: &[f64], f: &dyn Fn(f64) -> f64| {
        let xs: Vec<f64> = TREND_EPS.iter().map(|&e| f(1.0 / e)).collect();
        let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ly.iter().sum::<f64>() / 4.0);
        let num: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    };
    let poly_exp = fit(&buffered, &|v: f64| v.ln());
    let polylog_exp = fit(&buffered, &|v: f64| v.ln().ln());
    let cells: Vec<String> = TREND_EPS
        .iter()
        .zip(buffered.iter().zip(&horner))
        .map(|(e, (b, h))| format!("eps={e}: {:.1}us (Horner {:.1}us)", b / 1e3, h / 1e3))
        .collect();
    ok(
        9,
        "update_time_trend",
        ratio <= TREND_MAX_RATIO,
        format!(
            "{}; ratio 0.02/0.2 = {ratio:.2} <= {TREND_MAX_RATIO} (Horner baseline ratio {base_ratio:.2}); \
             fitted exponent in 1/eps {poly_exp:.2}, in log(1/eps) {polylog_exp:.2}",
            cells.join(", ")
        ),
    )
}
