//! Stream model and parameter derivation.
//!
//! Every hidden constant of the construction is a named knob in
//! [`Overrides`]. `Overrides::default()` uses the constants the analysis
//! calls for; [`Overrides::desk`] is a named preset that shrinks the
//! constants so that a single core can run the full pipeline at `eps` around
//! `0.1`. The resolved values always land in [`FpConfig`] and are written
//! out by [`FpConfig::to_text`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{invalid, Result, SketchError};

/// One turnstile update `x[index] += delta`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct StreamUpdate {
    pub index: u64,
    pub delta: i64,
}

impl StreamUpdate {
    pub const fn new(index: u64, delta: i64) -> Self {
        Self { index, delta }
    }

    /// Checks `1 <= index <= n` and `|delta| <= big_m`.
    pub fn validate(&self, n: u64, big_m: u64) -> Result<()> {
        if self.index == 0 || self.index > n {
            return invalid(format!("index {} outside [1, {n}]", self.index));
        }
        if self.delta.unsigned_abs() > big_m {
            return invalid(format!("|delta| = {} exceeds M = {big_m}", self.delta.unsigned_abs()));
        }
        Ok(())
    }
}

/// Optional replacements for every constant hidden in an asymptotic bound.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// Multiplier in the HighEnd row count `T`. Default 24.
    pub tau: Option<f64>,
    /// Multiplier in `k = c_k / eps^p`. Default 32.
    pub c_k: Option<f64>,
    /// Constant `C` of the reduced-vector norm bound. Default 4.
    pub big_c: Option<f64>,
    /// Roots-of-unity order. Default: smallest even integer `>= 4 log2(1/eps)`.
    pub r: Option<u32>,
    /// HighEnd bucket-hash independence. Default `ceil(log2(2/alpha)) + 6`.
    pub r_h: Option<u32>,
    /// Rows of every geometric-mean sketch. Default `max(8, max(4, ceil(4/p)) + 1)`.
    pub gme_rows: Option<usize>,
    /// Heavy-hitter buckets per repetition, `ceil(bucket_factor / phi)`. Default 80.
    pub hh_bucket_factor: Option<f64>,
    /// Heavy-hitter repetitions, `ceil(rep_factor * log2(1/delta'))`. Default 8.
    pub hh_rep_factor: Option<f64>,
    /// Sketches per heavy-hitter bucket estimator. Default `ceil(48 ln(1/delta'))`.
    pub hh_bank: Option<usize>,
    /// Rows of each heavy-hitter bucket sketch, never below `gme_rows`. Default `gme_rows`.
    pub hh_rows: Option<usize>,
    /// Sketches in the constant-factor estimator. Default `ceil(48 ln(1/delta))`.
    pub box_bank: Option<usize>,
    /// Rows of each constant-factor sketch, never below `gme_rows`. Default `gme_rows`.
    pub box_rows: Option<usize>,
    /// Cap on the reduced universe. Default `2^24`.
    pub n_cap: Option<u64>,
    /// CountSketch rows. Default: odd `>= ceil(log2(1/(delta phi)))`.
    pub cs_rows: Option<usize>,
    /// Light-estimator buckets. Default `ceil(4 / eps_balance^2)`.
    pub r_light: Option<usize>,
    /// Light-estimator repetitions. Default `ceil(log2(1/eps)^2)`.
    pub reps_light: Option<usize>,
    /// Light-estimator buffer length. Default `ceil(1/eps^p)`.
    pub buffer: Option<usize>,
    /// Independent instances is `ceil(instance_factor ln(1/delta))`, made odd. Default 8.
    pub instance_factor: Option<f64>,
    /// Bits per uniform fed to the stable transform. Default 32.
    pub precision_bits: Option<u32>,
    /// Degree at which remainders switch to Newton division. Default 32.
    pub crossover: Option<usize>,
    /// Fixed-point HighEnd counters. Default false.
    pub fixed_point: Option<bool>,
    /// Refuse configurations whose estimated state exceeds this many bytes. Default 4 GiB.
    pub state_limit: Option<u64>,
}

impl Overrides {
    /// Preset sized for one core and a few hundred megabytes.
    pub fn desk() -> Self {
        Self {
            tau: Some(1.0),
            c_k: Some(1.0),
            big_c: Some(1.0),
            hh_bucket_factor: Some(8.0),
            hh_rep_factor: Some(0.5),
            hh_bank: Some(1),
            hh_rows: Some(12),
            box_bank: Some(3),
            box_rows: Some(16),
            n_cap: Some(1 << 16),
            instance_factor: Some(2.0),
            ..Self::default()
        }
    }

    /// Named preset lookup used by front ends.
    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper" | "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => invalid(format!("unknown profile {other:?}")),
        }
    }
}

/// Fully resolved parameters of one estimator instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FpConfig {
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    pub n: u64,
    pub m_bound: u64,
    pub big_m: u64,

    pub tau: f64,
    pub c_k: f64,
    pub big_c: f64,

    /// `eps * log2(1/eps)`.
    pub eps_balance: f64,
    /// Reduced universe size.
    pub n_reduced: u64,
    /// Heaviness threshold of the HighEnd structure.
    pub alpha: f64,
    pub r: u32,
    pub t_big: usize,
    pub t_rows: usize,
    pub s: usize,
    pub r_h: u32,
    pub r_g: u32,
    pub gme_rows: usize,
    pub k_wise: usize,
    /// Independence of the constant-accuracy sketches (`eps' = 1/7`).
    pub k_box: usize,
    pub r_light: usize,
    pub reps_light: usize,
    pub buffer: usize,
    /// Independence of the reduction sign hash.
    pub sigma_k: usize,
    pub taylor_degree: usize,

    pub phi_hh: f64,
    pub hh_buckets: usize,
    pub hh_delta_prime: f64,
    pub hh_reps: usize,
    pub hh_bank: usize,
    pub hh_rows: usize,
    pub cs_cols: usize,
    pub cs_rows: usize,

    pub box_bank: usize,
    pub box_rows: usize,
    pub instances: usize,

    pub precision_bits: u32,
    pub crossover: usize,
    pub fixed_point: bool,
    pub state_limit: u64,

    /// `eps <= 1/sqrt(n)`: storing `x` exactly would be cheaper.
    pub warn_small_eps: bool,
    /// The reduced universe was capped below `ceil(1/eps^18)`.
    pub warn_n_capped: bool,
}

fn ceil_usize(v: f64) -> usize {
    v.ceil().max(1.0) as usize
}

fn odd(v: usize) -> usize {
    if v.is_multiple_of(2) {
        v + 1
    } else {
        v
    }
}

/// Default row count of a geometric-mean sketch.
pub fn default_gme_rows(p: f64) -> usize {
    let floor = ((4.0 / p).ceil() as usize).max(4) + 1;
    floor.max(8)
}

/// Smallest even `r >= 4 log2(1/eps)`, at least 2.
pub fn default_r(eps: f64) -> u32 {
    let r = (4.0 * (1.0 / eps).log2()).ceil().max(2.0) as u32;
    r + r % 2
}

/// Resolves every parameter from the problem size and the overrides.
pub fn derive_config(
    p: f64,
    eps: f64,
    delta: f64,
    n: u64,
    m_bound: u64,
    big_m: u64,
    ov: &Overrides,
) -> Result<FpConfig> {
    if !(p > 0.0 && p < 2.0) {
        return invalid(format!("p = {p} must lie in (0, 2)"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("eps = {eps} must lie in (0, 1/2)"));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return invalid(format!("delta = {delta} must lie in (0, 1/2)"));
    }
    if n == 0 || m_bound == 0 || big_m == 0 {
        return invalid("n, m and M must be positive");
    }
    if n >= crate::field::MERSENNE_61 {
        return invalid("n must be below the field modulus");
    }

    let tau = ov.tau.unwrap_or(24.0);
    let c_k = ov.c_k.unwrap_or(32.0);
    let big_c = ov.big_c.unwrap_or(4.0);
    for (name, v) in [("tau", tau), ("c_k", c_k), ("C", big_c)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} must be positive"));
        }
    }

    let log_inv_eps = (1.0 / eps).log2();
    let eps_balance = eps * log_inv_eps;

    let n_cap = ov.n_cap.unwrap_or(1 << 24).max(2);
    let n_full = (1.0 / eps).powi(18).ceil();
    let warn_n_capped = n_full > n_cap as f64;
    let n_reduced = if warn_n_capped { n_cap } else { (n_full as u64).max(2) };

    let alpha = eps_balance * eps_balance / (34.0 * big_c);
    let r = ov.r.unwrap_or_else(|| default_r(eps));
    if r < 2 || !r.is_multiple_of(2) {
        return invalid(format!("r = {r} must be even and at least 2"));
    }
    let t_big = ceil_usize(tau * log_inv_eps.max((2.0 / alpha).log2()));
    let t_rows = 3 * t_big;
    let s = ((4.0 / alpha).ceil() as usize).max(2 * (2.0 / alpha).ceil() as usize);
    let r_h = ov.r_h.unwrap_or((2.0 / alpha).log2().ceil() as u32 + 6).max(2);
    let r_g = r;

    let gme_floor = ((4.0 / p).ceil() as usize).max(4);
    let gme_rows = ov.gme_rows.unwrap_or_else(|| default_gme_rows(p));
    if gme_rows <= gme_floor {
        return invalid(format!("gme_rows = {gme_rows} must exceed max(4, 4/p) = {gme_floor}"));
    }
    let k_wise = ceil_usize(c_k / eps.powf(p)).max(2);
    let k_box = ceil_usize(c_k * 7f64.powf(p)).max(2);

    let r_light = ov.r_light.unwrap_or_else(|| ceil_usize(4.0 / (eps_balance * eps_balance)));
    let reps_light = ov.reps_light.unwrap_or_else(|| ceil_usize(log_inv_eps * log_inv_eps));
    let buffer = ov.buffer.unwrap_or_else(|| ceil_usize(1.0 / eps.powf(p)));
    if r_light < 2 || reps_light == 0 || buffer == 0 {
        return invalid("light estimator needs at least 2 buckets, 1 repetition and a buffer of 1");
    }
    let sigma_k = ((n_reduced as f64).log2().ceil() as usize).max(4);
    let taylor_degree = ceil_usize(4.0 * log_inv_eps);

    let phi_hh = alpha;
    let hh_levels_log = ((phi_hh * n_reduced as f64).log2()).max(0.0);
    let hh_delta_prime = phi_hh * delta / (12.0 * (hh_levels_log + 1.0));
    let hh_buckets = ceil_usize(ov.hh_bucket_factor.unwrap_or(80.0) / phi_hh);
    let hh_reps = odd(ceil_usize(ov.hh_rep_factor.unwrap_or(8.0) * (1.0 / hh_delta_prime).log2()));
    let hh_bank = ov.hh_bank.unwrap_or_else(|| ceil_usize(48.0 * (1.0 / hh_delta_prime).ln()));
    let hh_rows = ov.hh_rows.map_or(gme_rows, |r| r.max(gme_rows));
    let cs_cols = ceil_usize(21.0 * 2f64.powf(p) / phi_hh);
    let cs_rows = odd(ov.cs_rows.unwrap_or_else(|| ceil_usize((1.0 / (delta * phi_hh)).log2())));

    let box_bank = ov.box_bank.unwrap_or_else(|| ceil_usize(48.0 * (1.0 / delta).ln()));
    let box_rows = ov.box_rows.map_or(gme_rows, |r| r.max(gme_rows));
    if hh_bank == 0 || box_bank == 0 {
        return invalid("estimator banks must be non-empty");
    }
    let instances = odd(ceil_usize(ov.instance_factor.unwrap_or(8.0) * (1.0 / delta).ln()));

    let cfg = FpConfig {
        p,
        eps,
        delta,
        n,
        m_bound,
        big_m,
        tau,
        c_k,
        big_c,
        eps_balance,
        n_reduced,
        alpha,
        r,
        t_big,
        t_rows,
        s,
        r_h,
        r_g,
        gme_rows,
        k_wise,
        k_box,
        r_light,
        reps_light,
        buffer,
        sigma_k,
        taylor_degree,
        phi_hh,
        hh_buckets,
        hh_delta_prime,
        hh_reps,
        hh_bank,
        hh_rows,
        cs_cols,
        cs_rows,
        box_bank,
        box_rows,
        instances,
        precision_bits: ov.precision_bits.unwrap_or(32).clamp(8, 52),
        crossover: ov.crossover.unwrap_or(crate::polyeval::DEFAULT_CROSSOVER).max(1),
        fixed_point: ov.fixed_point.unwrap_or(false),
        state_limit: ov.state_limit.unwrap_or(4 << 30),
        warn_small_eps: eps <= 1.0 / (n as f64).sqrt(),
        warn_n_capped,
    };
    Ok(cfg)
}

impl FpConfig {
    /// Heavy-hitter tree levels: prefix lengths from `hh_top_level()` to `hh_depth()`.
    pub fn hh_depth(&self) -> u32 {
        crate::fphh::tree_depth(self.n_reduced)
    }

    pub fn hh_top_level(&self) -> u32 {
        crate::fphh::top_level(self.phi_hh, self.hh_depth())
    }

    /// Rough byte count of one estimator instance.
    pub fn state_bytes(&self) -> u64 {
        let f = 8u64;
        let counter = if self.fixed_point { 32 } else { 16 };
        let highend = (self.t_rows * self.s) as u64 * counter
            + (self.t_rows as u64) * (self.r_h + self.r_g) as u64 * f;
        let levels = (self.hh_depth() - self.hh_top_level() + 1) as u64;
        let fphh = levels * (self.hh_reps * self.hh_buckets) as u64 * (self.hh_bank * self.hh_rows) as u64 * f
            + (self.cs_rows * self.cs_cols) as u64 * f;
        let light = (self.r_light * self.reps_light * self.gme_rows) as u64 * f
            + (4 * self.gme_rows * self.k_wise) as u64 * f
            + self.buffer as u64 * 24;
        let fpbox = (self.box_bank * self.box_rows) as u64 * (f + 2 * self.k_box as u64 * f);
        highend + fphh + light + 2 * fpbox
    }

    /// Fails with [`SketchError::StateTooLarge`] above the configured limit.
    pub fn check_state_size(&self) -> Result<()> {
        let bytes = self.state_bytes();
        if bytes > self.state_limit {
            return Err(SketchError::StateTooLarge { bytes, limit: self.state_limit });
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("p", format!("{:?}", self.p)),
            ("eps", format!("{:?}", self.eps)),
            ("delta", format!("{:?}", self.delta)),
            ("n", self.n.to_string()),
            ("m_bound", self.m_bound.to_string()),
            ("big_m", self.big_m.to_string()),
            ("tau", format!("{:?}", self.tau)),
            ("c_k", format!("{:?}", self.c_k)),
            ("big_c", format!("{:?}", self.big_c)),
            ("eps_balance", format!("{:?}", self.eps_balance)),
            ("n_reduced", self.n_reduced.to_string()),
            ("alpha", format!("{:?}", self.alpha)),
            ("r", self.r.to_string()),
            ("t_big", self.t_big.to_string()),
            ("t_rows", self.t_rows.to_string()),
            ("s", self.s.to_string()),
            ("r_h", self.r_h.to_string()),
            ("r_g", self.r_g.to_string()),
            ("gme_rows", self.gme_rows.to_string()),
            ("k_wise", self.k_wise.to_string()),
            ("k_box", self.k_box.to_string()),
            ("r_light", self.r_light.to_string()),
            ("reps_light", self.reps_light.to_string()),
            ("buffer", self.buffer.to_string()),
            ("sigma_k", self.sigma_k.to_string()),
            ("taylor_degree", self.taylor_degree.to_string()),
            ("phi_hh", format!("{:?}", self.phi_hh)),
            ("hh_buckets", self.hh_buckets.to_string()),
            ("hh_delta_prime", format!("{:?}", self.hh_delta_prime)),
            ("hh_reps", self.hh_reps.to_string()),
            ("hh_bank", self.hh_bank.to_string()),
            ("hh_rows", self.hh_rows.to_string()),
            ("cs_cols", self.cs_cols.to_string()),
            ("cs_rows", self.cs_rows.to_string()),
            ("box_bank", self.box_bank.to_string()),
            ("box_rows", self.box_rows.to_string()),
            ("instances", self.instances.to_string()),
            ("precision_bits", self.precision_bits.to_string()),
            ("crossover", self.crossover.to_string()),
            ("fixed_point", self.fixed_point.to_string()),
            ("state_limit", self.state_limit.to_string()),
            ("warn_small_eps", self.warn_small_eps.to_string()),
            ("warn_n_capped", self.warn_n_capped.to_string()),
        ]
    }

    /// `key=value` lines, one per parameter, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Parses the output of [`Self::to_text`]. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| SketchError::Parse {
                line: no + 1,
                msg: "expected key=value".into(),
            })?;
            map.insert(k.trim().to_string(), (no + 1, v.trim().to_string()));
        }
        fn get<T: std::str::FromStr>(map: &BTreeMap<String, (usize, String)>, key: &str) -> Result<T> {
            let (line, v) = map.get(key).ok_or_else(|| SketchError::Parse {
                line: 0,
                msg: format!("missing key {key}"),
            })?;
            v.parse().map_err(|_| SketchError::Parse { line: *line, msg: format!("bad value for {key}") })
        }
        Ok(Self {
            p: get(&map, "p")?,
            eps: get(&map, "eps")?,
            delta: get(&map, "delta")?,
            n: get(&map, "n")?,
            m_bound: get(&map, "m_bound")?,
            big_m: get(&map, "big_m")?,
            tau: get(&map, "tau")?,
            c_k: get(&map, "c_k")?,
            big_c: get(&map, "big_c")?,
            eps_balance: get(&map, "eps_balance")?,
            n_reduced: get(&map, "n_reduced")?,
            alpha: get(&map, "alpha")?,
            r: get(&map, "r")?,
            t_big: get(&map, "t_big")?,
            t_rows: get(&map, "t_rows")?,
            s: get(&map, "s")?,
            r_h: get(&map, "r_h")?,
            r_g: get(&map, "r_g")?,
            gme_rows: get(&map, "gme_rows")?,
            k_wise: get(&map, "k_wise")?,
            k_box: get(&map, "k_box")?,
            r_light: get(&map, "r_light")?,
            reps_light: get(&map, "reps_light")?,
            buffer: get(&map, "buffer")?,
            sigma_k: get(&map, "sigma_k")?,
            taylor_degree: get(&map, "taylor_degree")?,
            phi_hh: get(&map, "phi_hh")?,
            hh_buckets: get(&map, "hh_buckets")?,
            hh_delta_prime: get(&map, "hh_delta_prime")?,
            hh_reps: get(&map, "hh_reps")?,
            hh_bank: get(&map, "hh_bank")?,
            hh_rows: get(&map, "hh_rows")?,
            cs_cols: get(&map, "cs_cols")?,
            cs_rows: get(&map, "cs_rows")?,
            box_bank: get(&map, "box_bank")?,
            box_rows: get(&map, "box_rows")?,
            instances: get(&map, "instances")?,
            precision_bits: get(&map, "precision_bits")?,
            crossover: get(&map, "crossover")?,
            fixed_point: get(&map, "fixed_point")?,
            state_limit: get(&map, "state_limit")?,
            warn_small_eps: get(&map, "warn_small_eps")?,
            warn_n_capped: get(&map, "warn_n_capped")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: f64, eps: f64) -> FpConfig {
        derive_config(p, eps, 0.1, 10_000, 100_000, 1000, &Overrides::default()).unwrap()
    }

    #[test]
    fn balance_and_alpha_at_quarter() {
        let c = cfg(1.0, 0.25);
        assert_eq!(c.eps_balance, 0.5);
        // (1/2)^2 / (34 * 4) = 1/544
        assert!((c.alpha - 1.0 / 544.0).abs() < 1e-15);
        assert_eq!(c.t_rows, 3 * c.t_big);
    }

    #[test]
    fn rejects_out_of_range() {
        let ov = Overrides::default();
        assert!(derive_config(0.0, 0.1, 0.1, 10, 10, 10, &ov).is_err());
        assert!(derive_config(2.0, 0.1, 0.1, 10, 10, 10, &ov).is_err());
        assert!(derive_config(1.0, 0.5, 0.1, 10, 10, 10, &ov).is_err());
        assert!(derive_config(1.0, 0.1, 0.0, 10, 10, 10, &ov).is_err());
        assert!(derive_config(1.0, 0.1, 0.1, 0, 10, 10, &ov).is_err());
        let bad = Overrides { gme_rows: Some(4), ..Overrides::default() };
        assert!(derive_config(1.0, 0.1, 0.1, 10, 10, 10, &bad).is_err());
        let bad = Overrides { r: Some(5), ..Overrides::default() };
        assert!(derive_config(1.0, 0.1, 0.1, 10, 10, 10, &bad).is_err());
    }

    #[test]
    fn small_eps_is_a_warning_not_an_error() {
        let c = derive_config(1.0, 0.05, 0.1, 100, 100, 10, &Overrides::default()).unwrap();
        assert!(c.warn_small_eps);
        assert!(!cfg(1.0, 0.1).warn_small_eps);
    }

    #[test]
    fn universe_cap() {
        let c = cfg(1.0, 0.1);
        assert!(c.warn_n_capped);
        assert_eq!(c.n_reduced, 1 << 24);
        let c = derive_config(1.0, 0.45, 0.1, 100, 100, 10, &Overrides::default()).unwrap();
        assert!(!c.warn_n_capped);
        assert_eq!(c.n_reduced, (1.0f64 / 0.45).powi(18).ceil() as u64);
    }

    #[test]
    fn defaults_are_the_documented_ones() {
        let c = cfg(1.0, 0.1);
        assert_eq!(c.tau, 24.0);
        assert_eq!(c.c_k, 32.0);
        assert_eq!(c.big_c, 4.0);
        assert_eq!(c.r, 14); // 4 log2(10) = 13.29
        assert_eq!(c.k_wise, 320);
        assert_eq!(c.gme_rows, 8);
        assert_eq!(cfg(0.5, 0.1).gme_rows, 9);
        assert_eq!(c.hh_reps % 2, 1);
        assert_eq!(c.cs_rows % 2, 1);
        assert_eq!(c.instances % 2, 1);
    }

    #[test]
    fn paper_constants_exceed_the_default_budget_at_small_eps() {
        let c = cfg(1.0, 0.1);
        assert!(matches!(c.check_state_size(), Err(SketchError::StateTooLarge { .. })));
        let d = derive_config(1.0, 0.1, 0.1, 10_000, 100_000, 1000, &Overrides::desk()).unwrap();
        d.check_state_size().unwrap();
    }

    #[test]
    fn text_roundtrip() {
        let c = derive_config(1.5, 0.2, 0.05, 1 << 20, 1 << 20, 77, &Overrides::desk()).unwrap();
        let back = FpConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(matches!(
            FpConfig::from_text("p=1\nnonsense\n"),
            Err(SketchError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn update_validation() {
        assert!(StreamUpdate::new(1, 5).validate(10, 5).is_ok());
        assert!(StreamUpdate::new(0, 5).validate(10, 5).is_err());
        assert!(StreamUpdate::new(11, 5).validate(10, 5).is_err());
        assert!(StreamUpdate::new(3, -6).validate(10, 5).is_err());
    }

    proptest! {
        #[test]
        fn invariants_hold(p in 0.05f64..1.99, eps in 0.01f64..0.49, delta in 0.001f64..0.49,
                           n in 1u64..1_000_000_000, desk in any::<bool>()) {
            let ov = if desk { Overrides::desk() } else { Overrides::default() };
            let c = derive_config(p, eps, delta, n, 1000, 1000, &ov).unwrap();
            prop_assert!(c.r.is_multiple_of(2) && c.r >= 2);
            prop_assert_eq!(c.t_rows, 3 * c.t_big);
            prop_assert!(c.s >= 2 * (2.0 / c.alpha).ceil() as usize);
            prop_assert!(c.s as f64 * c.alpha >= 4.0 - c.alpha);
            prop_assert!(c.gme_rows >= 5 && c.gme_rows > ((4.0 / p).ceil() as usize).max(4));
            prop_assert!(c.k_wise as f64 >= (c.c_k / eps.powf(p)).ceil());
            prop_assert!(c.n_reduced <= ov.n_cap.unwrap_or(1 << 24));
            let again = derive_config(p, eps, delta, n, 1000, 1000, &ov).unwrap();
            prop_assert_eq!(again, c);
        }
    }
}
