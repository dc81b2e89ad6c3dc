//! Probability vectors with non-negativity and unit-sum invariants.

use std::ops::Index;

use crate::error::EmError;

/// Tolerance on |sum - 1| accepted when validating a probability vector.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Checks that `values` is a probability vector: non-empty, finite,
/// component-wise non-negative, and summing to 1 within [`SIMPLEX_SUM_TOL`].
pub fn check_simplex(values: &[f64]) -> Result<(), EmError> {
    if values.is_empty() {
        return Err(EmError::ConstraintViolation(
            "probability vector is empty".into(),
        ));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(EmError::ConstraintViolation(format!(
                "component {i} is not finite: {v}"
            )));
        }
        if v < 0.0 {
            return Err(EmError::ConstraintViolation(format!(
                "component {i} is negative: {v}"
            )));
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(EmError::ConstraintViolation(format!(
            "components sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// A probability vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector {
    values: Vec<f64>,
}

impl SimplexVector {
    /// Validates `values` and wraps them without rescaling.
    pub fn new(values: Vec<f64>) -> Result<Self, EmError> {
        check_simplex(&values)?;
        Ok(Self { values })
    }

    /// The uniform distribution over `len` categories.
    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform simplex needs at least one category");
        Self {
            values: vec![1.0 / len as f64; len],
        }
    }

    /// Rescales a non-negative vector to unit sum. Fails with
    /// `DegenerateInput` when the total mass is zero.
    pub fn from_unnormalized(values: &[f64]) -> Result<Self, EmError> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(EmError::ConstraintViolation(format!(
                    "component {i} is not a non-negative finite value: {v}"
                )));
            }
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(EmError::DegenerateInput(
                "cannot normalize a vector with zero total mass".into(),
            ));
        }
        Ok(Self {
            values: values.iter().map(|v| v / total).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}
