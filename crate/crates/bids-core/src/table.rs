//! Value and policy tables over the state grid × stage-age lattice.

use crate::grid::StateGrid;
use serde::{Deserialize, Serialize};

/// `V(x_i, t, v)` for grid index `i` and stage-age `t = 0..=k`, together
/// with the trial reset-state value `v` it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    /// `stages[t][i]`, one row per stage-age.
    stages: Vec<Vec<f64>>,
    trial_value: f64,
}

impl ValueTable {
    pub fn new(stages: Vec<Vec<f64>>, trial_value: f64) -> Self {
        debug_assert!(!stages.is_empty());
        debug_assert!(stages.windows(2).all(|w| w[0].len() == w[1].len()));
        Self {
            stages,
            trial_value,
        }
    }

    /// The trial value `v` the backward recursion was evaluated at.
    pub fn trial_value(&self) -> f64 {
        self.trial_value
    }

    /// Horizon cap `k` (stage-ages run `0..=k`).
    pub fn horizon_cap(&self) -> u32 {
        (self.stages.len() - 1) as u32
    }

    pub fn grid_len(&self) -> usize {
        self.stages[0].len()
    }

    pub fn value(&self, state_index: usize, age: u32) -> f64 {
        self.stages[age as usize][state_index]
    }

    pub fn stage(&self, age: u32) -> &[f64] {
        &self.stages[age as usize]
    }

    /// Clamped linear interpolation in `x` at stage-age `t`. Ages beyond the
    /// horizon cap are a contract violation.
    pub fn interpolate(&self, grid: &StateGrid, x: f64, age: u32) -> f64 {
        assert!(
            (age as usize) < self.stages.len(),
            "stage-age {age} exceeds horizon cap {}",
            self.stages.len() - 1
        );
        grid.interpolate(&self.stages[age as usize], x)
    }

    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.stages.iter().zip(&other.stages) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }
}

/// One policy decision: whether to reset, and which control to apply
/// afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAction {
    pub reset: bool,
    pub control: f64,
}

/// Optimal action per `(grid point, stage-age)`; the exportable lookup
/// table. Resets are forced at age `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    /// `actions[t][i]`.
    actions: Vec<Vec<PolicyAction>>,
}

impl PolicyTable {
    pub fn new(actions: Vec<Vec<PolicyAction>>) -> Self {
        debug_assert!(!actions.is_empty());
        debug_assert!(actions.windows(2).all(|w| w[0].len() == w[1].len()));
        Self { actions }
    }

    pub fn horizon_cap(&self) -> u32 {
        (self.actions.len() - 1) as u32
    }

    pub fn grid_len(&self) -> usize {
        self.actions[0].len()
    }

    pub fn action(&self, state_index: usize, age: u32) -> PolicyAction {
        self.actions[age as usize][state_index]
    }

    pub fn stage(&self, age: u32) -> &[PolicyAction] {
        &self.actions[age as usize]
    }

    /// Action for an off-grid state via nearest-grid-point lookup.
    pub fn lookup(&self, grid: &StateGrid, x: f64, age: u32) -> PolicyAction {
        self.action(grid.nearest_index(x), age)
    }
}
