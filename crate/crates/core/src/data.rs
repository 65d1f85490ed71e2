//! Equally weighted scenario matrices.

use alloc::vec::Vec;

use crate::error::{check_finite, Error, Result};

/// An empirical distribution on `R^d`: `n` equally weighted scenarios stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    d: usize,
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.len() % d != 0 {
            return Err(Error::Dimension { expected: d, got: values.len() % d });
        }
        check_finite(&values, "scenario matrix")?;
        Ok(Self { d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().ok_or(Error::EmptySample)?.len();
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            crate::error::check_dim(d, r.len())?;
            values.extend_from_slice(r);
        }
        Self::new(values, d)
    }

    /// A single scenario.
    pub fn point_mass(y: &[f64]) -> Result<Self> {
        Self::new(y.to_vec(), y.len())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Scenarios shifted by `l`.
    pub fn translated(&self, l: &[f64]) -> Result<Self> {
        crate::error::check_dim(self.d, l.len())?;
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(self.d) {
            for (x, s) in row.iter_mut().zip(l) {
                *x += s;
            }
        }
        Self::new(values, self.d)
    }

    /// Scenarios scaled by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|x| x * c).collect(), self.d)
    }
}
