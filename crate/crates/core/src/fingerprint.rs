//! Zero-vector detection by a random evaluation of the frequency polynomial.

use rand::Rng;

use crate::codec::{Kind, Reader, Writer};
use crate::config::StreamUpdate;
use crate::error::{Result, SketchError};
use crate::field::{Fp, F61, M61};
use crate::hashing::PolyHashSeed;

/// `sum_i x_i rho^i` over `2^61 - 1` for a random point `rho`.
///
/// Zero whenever `x = 0`; for `x != 0` it vanishes with probability at most
/// `n / q` over the choice of `rho`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroFingerprint {
    accumulator: F61,
    /// Degree-0 seed holding `rho`.
    coeff_seed: PolyHashSeed,
}

impl ZeroFingerprint {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let rho = F61::new(rng.gen_range(2..crate::field::MERSENNE_61));
        Self::with_point(rho)
    }

    pub fn with_point(rho: F61) -> Self {
        let coeff_seed = PolyHashSeed::<M61>::from_coeffs(vec![rho], crate::field::MERSENNE_61)
            .expect("one coefficient is a valid seed");
        Self { accumulator: F61::new(0), coeff_seed }
    }

    fn rho(&self) -> F61 {
        self.coeff_seed.coeffs()[0]
    }

    #[inline]
    pub fn update(&mut self, u: StreamUpdate) {
        self.accumulator += Fp::from_i64(u.delta) * self.rho().pow(u.index);
    }

    pub fn accumulator(&self) -> F61 {
        self.accumulator
    }

    pub fn is_zero(&self) -> bool {
        self.accumulator.value() == 0
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.coeff_seed != other.coeff_seed {
            return Err(SketchError::Incompatible("fingerprint points differ".into()));
        }
        self.accumulator += other.accumulator;
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.field(self.rho());
        w.field(self.accumulator);
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        let mut f = Self::with_point(r.field()?);
        f.accumulator = r.field()?;
        Ok(f)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Fingerprint);
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Fingerprint)?;
        let f = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(f)
    }
}

pub fn fingerprint_update(fp: &mut ZeroFingerprint, u: StreamUpdate) {
    fp.update(u);
}
