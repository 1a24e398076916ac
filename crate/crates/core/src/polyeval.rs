//! Dense polynomial arithmetic over a prime field and fast multipoint
//! evaluation through a subproduct tree.
//!
//! Polynomials are coefficient vectors, lowest degree first. Multiplication
//! switches from schoolbook to Karatsuba above [`KARATSUBA_CUTOFF`];
//! remainders use schoolbook division below the tree's crossover degree and
//! a cached Newton inverse above it.

use std::cell::Cell;

use num_traits::{One, Zero};

use crate::field::{Fp, Modulus, M61};

pub const KARATSUBA_CUTOFF: usize = 32;
pub const DEFAULT_CROSSOVER: usize = 32;

thread_local! {
    static MULS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
fn count(n: usize) {
    MULS.with(|c| c.set(c.get() + n as u64));
}

/// Field multiplications performed by this module on the current thread.
pub fn mul_count() -> u64 {
    MULS.with(|c| c.get())
}

pub fn reset_mul_count() {
    MULS.with(|c| c.set(0));
}

/// `d · log2(d)^2 · log2(log2(d))`, the shape the multiplication count is
/// compared against.
pub fn op_bound_shape(d: usize) -> f64 {
    let l = (d.max(4) as f64).log2();
    d as f64 * l * l * l.log2()
}

fn schoolbook<M: Modulus>(a: &[Fp<M>], b: &[Fp<M>], out: &mut [Fp<M>]) {
    count(a.len() * b.len());
    for (i, &x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
}

fn add_into<M: Modulus>(dst: &mut [Fp<M>], src: &[Fp<M>]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn sub_into<M: Modulus>(dst: &mut [Fp<M>], src: &[Fp<M>]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d -= s;
    }
}

fn padded_sum<M: Modulus>(a: &[Fp<M>], b: &[Fp<M>]) -> Vec<Fp<M>> {
    let mut s = vec![Fp::zero(); a.len().max(b.len())];
    add_into(&mut s, a);
    add_into(&mut s, b);
    s
}

/// Accumulates `a * b` into `out`, which must hold `a.len() + b.len() - 1` terms.
fn mul_acc<M: Modulus>(a: &[Fp<M>], b: &[Fp<M>], out: &mut [Fp<M>]) {
    let (a, b) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if b.is_empty() {
        return;
    }
    if b.len() < KARATSUBA_CUTOFF {
        schoolbook(a, b, out);
        return;
    }
    if a.len() >= 2 * b.len() {
        for (i, chunk) in a.chunks(b.len()).enumerate() {
            let off = i * b.len();
            mul_acc(chunk, b, &mut out[off..off + chunk.len() + b.len() - 1]);
        }
        return;
    }
    let h = a.len() / 2;
    let (a0, a1) = a.split_at(h);
    if b.len() <= h {
        mul_acc(a0, b, &mut out[..a0.len() + b.len() - 1]);
        mul_acc(a1, b, &mut out[h..h + a1.len() + b.len() - 1]);
        return;
    }
    let (b0, b1) = b.split_at(h);
    let z0 = poly_mul(a0, b0);
    let z2 = poly_mul(a1, b1);
    let mut z1 = poly_mul(&padded_sum(a0, a1), &padded_sum(b0, b1));
    sub_into(&mut z1, &z0);
    sub_into(&mut z1, &z2);
    add_into(out, &z0);
    let room = out.len() - h;
    add_into(&mut out[h..], &z1[..z1.len().min(room)]);
    add_into(&mut out[2 * h..], &z2);
}

/// Product of two polynomials.
pub fn poly_mul<M: Modulus>(a: &[Fp<M>], b: &[Fp<M>]) -> Vec<Fp<M>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Fp::zero(); a.len() + b.len() - 1];
    mul_acc(a, b, &mut out);
    out
}

/// Low `n` coefficients of `a * b`.
fn mul_low<M: Modulus>(a: &[Fp<M>], b: &[Fp<M>], n: usize) -> Vec<Fp<M>> {
    let mut p = poly_mul(&a[..a.len().min(n)], &b[..b.len().min(n)]);
    p.resize(n, Fp::zero());
    p
}

/// Power series inverse of `a` modulo `X^n`; requires `a[0] != 0`.
pub fn series_inverse<M: Modulus>(a: &[Fp<M>], n: usize) -> Vec<Fp<M>> {
    let inv0 = a[0].inv().expect("constant term must be invertible");
    let mut b = vec![inv0];
    let mut prec = 1;
    while prec < n {
        prec = (2 * prec).min(n);
        // b <- b (2 - a b)
        let mut ab = mul_low(a, &b, prec);
        for c in ab.iter_mut() {
            *c = -*c;
        }
        ab[0] += Fp::one() + Fp::one();
        b = mul_low(&b, &ab, prec);
    }
    b.truncate(n);
    b
}

/// Remainder of `f` by a monic `g` using long division.
pub fn poly_rem_schoolbook<M: Modulus>(f: &[Fp<M>], g: &[Fp<M>]) -> Vec<Fp<M>> {
    let m = g.len() - 1;
    debug_assert!(g[m] == Fp::one(), "divisor must be monic");
    let mut r = f.to_vec();
    if r.len() <= m {
        r.resize(m, Fp::zero());
        return r;
    }
    for i in (m..r.len()).rev() {
        let c = r[i];
        if c.is_zero() {
            continue;
        }
        count(m);
        for j in 0..m {
            let t = c * g[j];
            r[i - m + j] -= t;
        }
        r[i] = Fp::zero();
    }
    r.truncate(m);
    r
}

/// A monic divisor with its reversed inverse cached for fast division.
#[derive(Clone, Debug)]
struct Divisor<M: Modulus> {
    g: Vec<Fp<M>>,
    /// `rev(g)^{-1} mod X^m`, present above the crossover degree.
    inv_rev: Option<Vec<Fp<M>>>,
}

impl<M: Modulus> Divisor<M> {
    fn new(g: Vec<Fp<M>>, crossover: usize) -> Self {
        let m = g.len() - 1;
        let inv_rev = (m >= crossover).then(|| {
            let rev: Vec<Fp<M>> = g.iter().rev().copied().collect();
            series_inverse(&rev, m)
        });
        Self { g, inv_rev }
    }

    fn degree(&self) -> usize {
        self.g.len() - 1
    }

    /// `f mod g` for `f` of length at most `2m`.
    fn rem_short(&self, f: &[Fp<M>]) -> Vec<Fp<M>> {
        let m = self.degree();
        debug_assert!(f.len() <= 2 * m);
        let Some(inv_rev) = &self.inv_rev else {
            return poly_rem_schoolbook(f, &self.g);
        };
        if f.len() <= m {
            let mut r = f.to_vec();
            r.resize(m, Fp::zero());
            return r;
        }
        let qlen = f.len() - m;
        let frev: Vec<Fp<M>> = f.iter().rev().take(qlen).copied().collect();
        let mut q = mul_low(&frev, inv_rev, qlen);
        q.reverse();
        let qg = poly_mul(&q, &self.g[..m]);
        let mut r = f[..m].to_vec();
        sub_into(&mut r, &qg);
        r
    }

    /// `f mod g` for any length, folding `m` coefficients at a time from the top.
    fn rem(&self, f: &[Fp<M>]) -> Vec<Fp<M>> {
        let m = self.degree();
        if m == 0 {
            return Vec::new();
        }
        if f.len() <= 2 * m {
            return self.rem_short(f);
        }
        if self.inv_rev.is_none() {
            return poly_rem_schoolbook(f, &self.g);
        }
        let top = f.len() - m;
        let mut r = self.rem_short(&f[top..]);
        let mut hi = top;
        while hi > 0 {
            let lo = hi.saturating_sub(m);
            let mut buf = f[lo..hi].to_vec();
            buf.extend_from_slice(&r);
            r = self.rem_short(&buf);
            hi = lo;
        }
        r
    }
}

/// Balanced subproduct tree over a padded point set.
#[derive(Clone, Debug)]
pub struct ProductTree<M: Modulus = M61> {
    points: Vec<Fp<M>>,
    /// `levels[0]` are the linear leaves; the last level holds the root.
    levels: Vec<Vec<Divisor<M>>>,
    crossover: usize,
}

impl<M: Modulus> ProductTree<M> {
    pub fn new(points: &[Fp<M>]) -> Self {
        Self::with_crossover(points, DEFAULT_CROSSOVER)
    }

    /// Builds the tree, padding the point set to a power of two with zeros.
    pub fn with_crossover(points: &[Fp<M>], crossover: usize) -> Self {
        assert!(!points.is_empty(), "product tree needs at least one point");
        let crossover = crossover.max(1);
        let width = points.len().next_power_of_two();
        let mut padded = points.to_vec();
        padded.resize(width, Fp::zero());
        let mut levels = vec![padded
            .iter()
            .map(|&x| Divisor { g: vec![-x, Fp::one()], inv_rev: None })
            .collect::<Vec<_>>()];
        while levels.last().unwrap().len() > 1 {
            let prev = levels.last().unwrap();
            let next = prev
                .chunks(2)
                .map(|pair| Divisor::new(poly_mul(&pair[0].g, &pair[1].g), crossover))
                .collect();
            levels.push(next);
        }
        Self { points: points.to_vec(), levels, crossover }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Fp<M>] {
        &self.points
    }

    pub fn crossover(&self) -> usize {
        self.crossover
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Padded width (a power of two).
    pub fn width(&self) -> usize {
        self.levels[0].len()
    }

    /// Subproduct at `level` (0 = leaves) and position `idx`.
    pub fn node(&self, level: usize, idx: usize) -> &[Fp<M>] {
        &self.levels[level][idx].g
    }

    pub fn root(&self) -> &[Fp<M>] {
        &self.levels.last().unwrap()[0].g
    }
}

pub fn build_product_tree<M: Modulus>(points: &[Fp<M>]) -> ProductTree<M> {
    ProductTree::new(points)
}

/// Values of `coeffs` at every tree point, in input order.
pub fn multipoint_eval<M: Modulus>(coeffs: &[Fp<M>], tree: &ProductTree<M>) -> Vec<Fp<M>> {
    let top = tree.levels.len() - 1;
    let mut rems = vec![tree.levels[top][0].rem(coeffs)];
    for level in (0..top).rev() {
        let nodes = &tree.levels[level];
        let mut next = Vec::with_capacity(nodes.len());
        for (i, parent) in rems.iter().enumerate() {
            next.push(nodes[2 * i].rem(parent));
            next.push(nodes[2 * i + 1].rem(parent));
        }
        rems = next;
    }
    rems.into_iter()
        .take(tree.len())
        .map(|r| r.first().copied().unwrap_or_else(Fp::zero))
        .collect()
}
