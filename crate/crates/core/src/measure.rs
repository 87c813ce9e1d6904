//! Weighted sample collections shared by the neighborhood and trajectory
//! statistics.

use crate::{Error, Result};

/// A finitely supported probability measure: atoms with nonnegative weights
/// summing to 1.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure<T> {
    atoms: Vec<T>,
    weights: Vec<f64>,
}

impl<T> EmpiricalMeasure<T> {
    pub fn new(atoms: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} atoms vs {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(EmpiricalMeasure { atoms, weights })
    }

    /// Uniform measure over the given atoms.
    pub fn uniform(atoms: Vec<T>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        let w = 1.0 / atoms.len() as f64;
        let mut weights = vec![w; atoms.len()];
        // force exact normalization regardless of rounding
        let total: f64 = weights.iter().sum();
        let last = weights.len() - 1;
        weights[last] += 1.0 - total;
        Ok(EmpiricalMeasure { atoms, weights })
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Integrate a function of the atoms.
    pub fn expect(&self, mut h: impl FnMut(&T) -> f64) -> f64 {
        self.atoms
            .iter()
            .zip(self.weights.iter())
            .map(|(a, &w)| w * h(a))
            .sum()
    }
}
