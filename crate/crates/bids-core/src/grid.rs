//! Uniform one-dimensional state grid with clamped linear interpolation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid upper bound {upper} must exceed lower bound {lower}")]
    EmptyRange { lower: f64, upper: f64 },
    #[error("grid bounds must be finite (lower={lower}, upper={upper})")]
    NonFinite { lower: f64, upper: f64 },
}

/// Uniformly spaced points `lower = x_0 < x_1 < ... < x_{n-1} = upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    lower: f64,
    upper: f64,
    points: usize,
}

impl StateGrid {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self, GridError> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(GridError::NonFinite { lower, upper });
        }
        if points < 2 {
            return Err(GridError::TooFewPoints(points));
        }
        if upper <= lower {
            return Err(GridError::EmptyRange { lower, upper });
        }
        Ok(Self {
            lower,
            upper,
            points,
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false // at least two points by construction
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.points);
        self.lower + self.spacing() * i as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.point(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Index of the grid point closest to `x` (out-of-range `x` maps to an
    /// end point). Used for policy lookups, where interpolating a discrete
    /// action makes no sense.
    pub fn nearest_index(&self, x: f64) -> usize {
        let pos = (x.clamp(self.lower, self.upper) - self.lower) / self.spacing();
        (pos.round() as usize).min(self.points - 1)
    }

    /// Left cell index and fractional offset for clamped linear
    /// interpolation at `x`. The fraction lies in `[0, 1]` and the index in
    /// `0..points-1`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let clamped = x.clamp(self.lower, self.upper);
        let pos = (clamped - self.lower) / self.spacing();
        let cell = (pos.floor() as usize).min(self.points - 2);
        let frac = (pos - cell as f64).clamp(0.0, 1.0);
        (cell, frac)
    }

    /// Piecewise-linear interpolation of `values` (one entry per grid
    /// point) at `x`, clamping `x` to the grid range first.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.points);
        let (cell, frac) = self.locate(x);
        values[cell] * (1.0 - frac) + values[cell + 1] * frac
    }
}
