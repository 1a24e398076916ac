//! Exact answers from the materialized vector.

use std::collections::BTreeMap;

use crate::config::StreamUpdate;
use crate::error::{invalid, Result};
use crate::pipeline::UniverseReduction;

/// Largest universe the oracle will materialize.
pub const MAX_ORACLE_N: u64 = 1 << 26;

/// The frequency vector, stored sparsely in index order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Oracle {
    n: u64,
    x: BTreeMap<u64, i64>,
}

impl Oracle {
    pub fn new(n: u64) -> Result<Self> {
        if n > MAX_ORACLE_N {
            return invalid(format!("n = {n} is too large to materialize (limit {MAX_ORACLE_N})"));
        }
        Ok(Self { n, x: BTreeMap::new() })
    }

    pub fn from_updates<I: IntoIterator<Item = StreamUpdate>>(n: u64, updates: I) -> Result<Self> {
        let mut o = Self::new(n)?;
        for u in updates {
            o.update(u);
        }
        Ok(o)
    }

    pub fn from_vector(n: u64, x: &[(u64, i64)]) -> Result<Self> {
        Self::from_updates(n, x.iter().map(|&(i, d)| StreamUpdate::new(i, d)))
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn update(&mut self, u: StreamUpdate) {
        let v = self.x.entry(u.index).or_default();
        *v += u.delta;
        if *v == 0 {
            self.x.remove(&u.index);
        }
    }

    pub fn get(&self, i: u64) -> i64 {
        self.x.get(&i).copied().unwrap_or(0)
    }

    /// Nonzero entries in index order.
    pub fn support(&self) -> Vec<(u64, i64)> {
        self.x.iter().map(|(&i, &v)| (i, v)).collect()
    }

    /// `sum_i |x_i|^p`.
    pub fn fp(&self, p: f64) -> f64 {
        fp_of(self.x.values().copied(), p)
    }

    /// Indices with `|x_i|^p >= phi F_p`, with their signs.
    pub fn heavy(&self, phi: f64, p: f64) -> Vec<(u64, i64)> {
        let cut = phi * self.fp(p);
        self.x
            .iter()
            .filter(|(_, &v)| (v.abs() as f64).powf(p) >= cut)
            .map(|(&i, &v)| (i, v.signum()))
            .collect()
    }

    /// The reduced vector `y` under `red`.
    pub fn reduced(&self, red: &UniverseReduction) -> BTreeMap<u64, i64> {
        let mut y = BTreeMap::new();
        for (&i, &v) in &self.x {
            *y.entry(red.reduce(i)).or_insert(0) += red.sign(i) * v;
        }
        y.retain(|_, v| *v != 0);
        y
    }
}

pub fn fp_of<I: IntoIterator<Item = i64>>(values: I, p: f64) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc + (v.abs() as f64).powf(p))
}
