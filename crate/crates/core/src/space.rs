//! Affine maps between a native box and the unit cube, and observation
//! standardization.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// An axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("bounds must have at least one dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("lower bound must be below upper bound"));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(alloc::vec![lower; dim], alloc::vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| (*l..=*u).contains(v))
    }

    /// Native point to the unit cube; the result is clamped into `[0, 1]`.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, l), u)| ((v - l) / (u - l)).clamp(0.0, 1.0))
            .collect()
    }

    /// Unit-cube point to the native box; the result is clamped into the box.
    pub fn from_unit(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, l), u)| (l + v * (u - l)).clamp(*l, *u))
            .collect()
    }
}

/// `y ↦ (y − mean) / std`. A constant sample gets unit scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = sqrt(var);
        let std = if std > 1e-12 * (1.0 + mean.abs()) { std } else { 1.0 };
        Ok(Self { mean, std })
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        self.mean + z * self.std
    }

    pub fn apply_all(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.apply(v)).collect()
    }
}
