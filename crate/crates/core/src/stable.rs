//! Symmetric p-stable variates and their absolute moments.
//!
//! Variates use the Chambers-Mallows-Stuck transform, normalized so that the
//! characteristic function is `exp(-|t|^p)`. For that normalization
//! `E|Q|^lambda = (2/pi) Gamma(1 - lambda/p) Gamma(lambda) sin(pi lambda / 2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function (Lanczos, `g = 7`, nine terms, reflection below 1/2).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// `E|Q|^lambda` for standard symmetric p-stable `Q`, `-1 < lambda < p`.
pub fn stable_abs_moment(p: f64, lambda: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 2.0) {
        return invalid(format!("p = {p} outside (0, 2]"));
    }
    if !(lambda > -1.0 && lambda < p) {
        return invalid(format!("lambda = {lambda} outside (-1, {p})"));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 / PI * gamma(1.0 - lambda / p) * gamma(lambda) * (FRAC_PI_2 * lambda).sin())
}

/// Normalizer `C_{t,p}` making `C * prod_j |y_j|^{p/t}` unbiased for `||x||_p^p`.
pub fn gme_constant(rows: usize, p: f64) -> Result<f64> {
    if rows as f64 <= 4.0 / p || rows <= 4 {
        return invalid(format!("{rows} rows; need more than max(4, 4/p)"));
    }
    let t = rows as f64;
    Ok(stable_abs_moment(p, p / t)?.powf(-t))
}

/// Maps `bits` random bits to the open interval `(0, 1)`.
#[inline]
pub fn uniform_from_bits(value: u64, bits: u32) -> f64 {
    let scale = (-(bits as f64)).exp2();
    ((value & ((1u64 << bits) - 1)) as f64 + 0.5) * scale
}

/// Top `bits` bits of a field element of `2^61 - 1`, as an open uniform.
#[inline]
pub fn uniform_from_field(v: u64, bits: u32) -> f64 {
    uniform_from_bits(v >> (61 - bits), bits)
}

/// Pure sampler for one stability index.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct StableSampler {
    p: f64,
    precision_bits: u32,
    inv_p: f64,
    tail_exp: f64,
}

impl StableSampler {
    pub fn new(p: f64, precision_bits: u32) -> Result<Self> {
        if !(p > 0.0 && p < 2.0) {
            return invalid(format!("p = {p} outside (0, 2)"));
        }
        if !(8..=52).contains(&precision_bits) {
            return invalid("precision_bits must lie in [8, 52]");
        }
        Ok(Self { p, precision_bits, inv_p: 1.0 / p, tail_exp: (1.0 - p) / p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Chambers-Mallows-Stuck transform of two open uniforms.
    ///
    /// Inputs equal to 0 or 1 are moved one ulp inward.
    #[inline]
    pub fn sample(&self, u1: f64, u2: f64) -> f64 {
        let u1 = clamp_open(u1);
        let u2 = clamp_open(u2);
        let theta = PI * (u1 - 0.5);
        if self.p == 1.0 {
            return theta.tan();
        }
        let log_w = (-u2.ln()).ln();
        let log_mag = self.tail_exp * (((1.0 - self.p) * theta).cos().ln() - log_w) - self.inv_p * theta.cos().ln();
        (self.p * theta).sin() * log_mag.exp()
    }

    /// Variate from two field elements, using their top `precision_bits` bits.
    #[inline]
    pub fn sample_field(&self, a: u64, b: u64) -> f64 {
        self.sample(
            uniform_from_field(a, self.precision_bits),
            uniform_from_field(b, self.precision_bits),
        )
    }
}

#[inline]
fn clamp_open(u: f64) -> f64 {
    if u <= 0.0 {
        f64::MIN_POSITIVE
    } else if u >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        u
    }
}

pub fn sample_pstable(sampler: &StableSampler, u1: f64, u2: f64) -> f64 {
    sampler.sample(u1, u2)
}
