//! Prime-field arithmetic.
//!
//! Production hashing runs over the Mersenne prime `2^61 - 1`; tiny fields
//! such as `F_7` and `F_17` are available through [`SmallPrime`] so that
//! independence properties can be checked by exhaustive enumeration.

use std::fmt;
use std::hash::Hash;
use std::marker::PhantomData;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

/// A prime modulus, fixed at compile time.
pub trait Modulus: Copy + Clone + fmt::Debug + Default + PartialEq + Eq + Hash + Send + Sync + 'static {
    const P: u64;

    #[inline]
    fn mul_reduce(a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % Self::P as u128) as u64
    }

    #[inline]
    fn reduce(v: u64) -> u64 {
        v % Self::P
    }
}

/// The Mersenne prime `2^61 - 1`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct M61;

pub const MERSENNE_61: u64 = (1 << 61) - 1;

impl Modulus for M61 {
    const P: u64 = MERSENNE_61;

    #[inline(always)]
    fn mul_reduce(a: u64, b: u64) -> u64 {
        let x = a as u128 * b as u128;
        let lo = (x as u64) & MERSENNE_61;
        let hi = (x >> 61) as u64;
        let s = lo + hi;
        let s = (s & MERSENNE_61) + (s >> 61);
        if s >= MERSENNE_61 {
            s - MERSENNE_61
        } else {
            s
        }
    }

    #[inline(always)]
    fn reduce(v: u64) -> u64 {
        let s = (v & MERSENNE_61) + (v >> 61);
        if s >= MERSENNE_61 {
            s - MERSENNE_61
        } else {
            s
        }
    }
}

/// A small prime modulus given as a const parameter (used in tests and toys).
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SmallPrime<const Q: u64>;

impl<const Q: u64> Modulus for SmallPrime<Q> {
    const P: u64 = Q;
}

/// An element of `Z/PZ`, always stored in canonical form `0 <= v < P`.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fp<M: Modulus> {
    v: u64,
    _m: PhantomData<M>,
}

pub type F61 = Fp<M61>;

impl<M: Modulus> Fp<M> {
    /// Reduces an arbitrary `u64`.
    #[inline]
    pub fn new(v: u64) -> Self {
        Self::from_canonical(M::reduce(v))
    }

    /// Wraps an already reduced value. Debug builds check the range.
    #[inline(always)]
    pub fn from_canonical(v: u64) -> Self {
        debug_assert!(v < M::P);
        Self { v, _m: PhantomData }
    }

    pub fn from_i64(v: i64) -> Self {
        if v >= 0 {
            Self::new(v as u64)
        } else {
            -Self::new(v.unsigned_abs())
        }
    }

    #[inline(always)]
    pub fn value(self) -> u64 {
        self.v
    }

    pub fn modulus() -> u64 {
        M::P
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat; `None` for zero.
    pub fn inv(self) -> Option<Self> {
        if self.v == 0 {
            None
        } else {
            Some(self.pow(M::P - 2))
        }
    }
}

impl<M: Modulus> fmt::Debug for Fp<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.v)
    }
}

impl<M: Modulus> fmt::Display for Fp<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.v)
    }
}

impl<M: Modulus> Add for Fp<M> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        let s = self.v + rhs.v;
        Self::from_canonical(if s >= M::P { s - M::P } else { s })
    }
}

impl<M: Modulus> Sub for Fp<M> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        Self::from_canonical(if self.v >= rhs.v {
            self.v - rhs.v
        } else {
            self.v + M::P - rhs.v
        })
    }
}

impl<M: Modulus> Mul for Fp<M> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        Self::from_canonical(M::mul_reduce(self.v, rhs.v))
    }
}

impl<M: Modulus> Neg for Fp<M> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Self::from_canonical(if self.v == 0 { 0 } else { M::P - self.v })
    }
}

impl<M: Modulus> AddAssign for Fp<M> {
    #[inline(always)]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<M: Modulus> SubAssign for Fp<M> {
    #[inline(always)]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<M: Modulus> MulAssign for Fp<M> {
    #[inline(always)]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<M: Modulus> Zero for Fp<M> {
    fn zero() -> Self {
        Self::from_canonical(0)
    }
    fn is_zero(&self) -> bool {
        self.v == 0
    }
}

impl<M: Modulus> One for Fp<M> {
    fn one() -> Self {
        Self::from_canonical(1)
    }
}
