//! Synthetic frequency vectors and turnstile streams that realize them.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::StreamUpdate;

/// Sparse vector as `(index, value)` pairs with distinct indices.
pub type SparseVec = Vec<(u64, i64)>;

pub fn point_mass(index: u64, value: i64) -> SparseVec {
    vec![(index, value)]
}

/// `value` on each of `1..=n`.
pub fn uniform(n: u64, value: i64) -> SparseVec {
    (1..=n).map(|i| (i, value)).collect()
}

/// `x_i = round(scale / i^theta)` (at least 1) on `1..=n`.
pub fn zipf(n: u64, theta: f64, scale: f64) -> SparseVec {
    (1..=n)
        .map(|i| (i, (scale / (i as f64).powf(theta)).round().max(1.0) as i64))
        .collect()
}

/// Zipf values placed on a random permutation of `1..=n` with random signs.
pub fn zipf_scrambled<R: Rng + ?Sized>(n: u64, theta: f64, scale: f64, rng: &mut R) -> SparseVec {
    let mut idx: Vec<u64> = (1..=n).collect();
    idx.shuffle(rng);
    zipf(n, theta, scale)
        .into_iter()
        .zip(idx)
        .map(|((_, v), i)| (i, if rng.gen_bool(0.5) { v } else { -v }))
        .collect()
}

/// `heavy` coordinates of magnitude `heavy_value` and `light` coordinates
/// with magnitudes uniform in `1..=light_max`, on distinct random indices of
/// `1..=n` with random signs. Heavy entries come first.
pub fn planted<R: Rng + ?Sized>(
    n: u64,
    heavy: usize,
    heavy_value: i64,
    light: usize,
    light_max: i64,
    rng: &mut R,
) -> SparseVec {
    assert!((heavy + light) as u64 <= n, "not enough room for the planted vector");
    let idx = rand::seq::index::sample(rng, n as usize, heavy + light);
    idx.iter()
        .enumerate()
        .map(|(k, i)| {
            let mag = if k < heavy { heavy_value } else { rng.gen_range(1..=light_max) };
            ((i + 1) as u64, if rng.gen_bool(0.5) { mag } else { -mag })
        })
        .collect()
}

/// Turnstile stream of about `m` updates summing to `x`.
///
/// Each coordinate is split into a few signed pieces, and the remaining
/// budget is spent on insert/delete pairs that cancel. The order is shuffled.
pub fn turnstile<R: Rng + ?Sized>(x: &[(u64, i64)], n: u64, m: usize, max_delta: i64, rng: &mut R) -> Vec<StreamUpdate> {
    let mut out = Vec::with_capacity(m.max(x.len()));
    for &(i, v) in x {
        if v == 0 {
            continue;
        }
        let pieces = rng.gen_range(1..=3usize);
        let mut left = v;
        for _ in 1..pieces {
            let d = rng.gen_range(-max_delta..=max_delta);
            if (left - d).abs() > max_delta * 64 {
                continue;
            }
            out.push(StreamUpdate::new(i, d));
            left -= d;
        }
        while left != 0 {
            let d = left.clamp(-max_delta, max_delta);
            out.push(StreamUpdate::new(i, d));
            left -= d;
        }
    }
    while out.len() + 1 < m {
        let i = rng.gen_range(1..=n);
        let d = rng.gen_range(1..=max_delta);
        out.push(StreamUpdate::new(i, d));
        out.push(StreamUpdate::new(i, -d));
    }
    out.shuffle(rng);
    out
}
