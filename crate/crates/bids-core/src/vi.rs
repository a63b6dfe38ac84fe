//! Value-iteration baseline on the augmented-state MDP.
//!
//! The augmented state is `(grid point, age)` and the action is
//! `(control, reset flag)`, with the reset forced at age `k`. This solver
//! evaluates the model directly atom by atom — it shares only the grid,
//! noise, and interpolation primitives with the binary-search solver — so
//! the two reach the same fixed point through entirely different
//! computations. That makes it the correctness oracle, and also the
//! baseline whose iteration count degrades as the discount approaches 1.

use crate::grid::StateGrid;
use crate::noise::DiscreteNoise;
use crate::problem::{ResetModel, ResetProblem};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ViError {
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("value iteration did not converge in {max_iter} sweeps (last sup-norm change {last_diff:e}, threshold {threshold:e})")]
    NotConverged {
        max_iter: usize,
        last_diff: f64,
        threshold: f64,
    },
}

/// Converged value table plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct ViSolution {
    /// `values[t][i]` = optimal cost-to-go from grid point `i` at age `t`.
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Sup-norm of successive differences, one entry per sweep.
    pub sup_diffs: Vec<f64>,
}

impl ViSolution {
    /// Cost-to-go at the reset state with age zero.
    pub fn reset_state_value(&self, grid: &StateGrid, reset_state: f64) -> f64 {
        grid.interpolate(&self.values[0], reset_state)
    }
}

pub struct AugmentedMdp<'a, M: ResetModel> {
    problem: &'a ResetProblem<M>,
    grid: &'a StateGrid,
    noise: &'a DiscreteNoise,
}

impl<'a, M: ResetModel> AugmentedMdp<'a, M> {
    pub fn new(
        problem: &'a ResetProblem<M>,
        grid: &'a StateGrid,
        noise: &'a DiscreteNoise,
    ) -> Self {
        Self {
            problem,
            grid,
            noise,
        }
    }

    /// Continuation Q-value of action `(u, r = 0)` from `(x_i, t)`:
    /// `E[g(x,t,u,w) + γ·Ĵ(h(x,t,u,w), t+1)]`.
    pub fn q_continue(&self, values: &[Vec<f64>], state_index: usize, age: u32, control: f64) -> f64 {
        let x = self.grid.point(state_index);
        let next = &values[age as usize + 1];
        self.noise.expectation(|w| {
            self.problem.model.stage_cost(x, age, control, w)
                + self.problem.discount
                    * self
                        .grid
                        .interpolate(next, self.problem.model.dynamics(x, age, control, w))
        })
    }

    /// Reset Q-value of action `(u, r = 1)` from `(x_i, t)`: the reset cost
    /// is paid at the pre-decision state, then the period runs from the
    /// reset state at age zero.
    pub fn q_reset(&self, values: &[Vec<f64>], state_index: usize, age: u32, control: f64) -> f64 {
        let x = self.grid.point(state_index);
        let zeta = self.problem.reset_state;
        let next = &values[1];
        self.noise.expectation(|w| {
            self.problem.model.reset_cost(x, age, w)
                + self.problem.model.stage_cost(zeta, 0, control, w)
                + self.problem.discount
                    * self
                        .grid
                        .interpolate(next, self.problem.model.dynamics(zeta, 0, control, w))
        })
    }

    /// One synchronous sweep of the Bellman operator over all `(x_i, t)`,
    /// excluding the infeasible `r = 0` branch at `t = k`.
    pub fn bellman_backup(&self, values: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.problem.horizon_cap;
        let n = self.grid.len();

        // The post-reset minimization is identical for every source state.
        let zeta = self.problem.reset_state;
        let next = &values[1];
        let reset_continuation = self
            .problem
            .control_grid
            .iter()
            .map(|&u| {
                self.noise.expectation(|w| {
                    self.problem.model.stage_cost(zeta, 0, u, w)
                        + self.problem.discount
                            * self
                                .grid
                                .interpolate(next, self.problem.model.dynamics(zeta, 0, u, w))
                })
            })
            .fold(f64::INFINITY, f64::min);

        (0..=k)
            .map(|age| {
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let x = self.grid.point(i);
                        let reset_branch = self
                            .noise
                            .expectation(|w| self.problem.model.reset_cost(x, age, w))
                            + reset_continuation;
                        if age == k {
                            return reset_branch;
                        }
                        let continue_branch = self
                            .problem
                            .control_grid
                            .iter()
                            .map(|&u| self.q_continue(values, i, age, u))
                            .fold(f64::INFINITY, f64::min);
                        reset_branch.min(continue_branch)
                    })
                    .collect()
            })
            .collect()
    }

    /// Synchronous sweeps from the zero table until the sup-norm change
    /// falls below `tol·(1−γ)/(2γ)`, which certifies a sup-norm distance of
    /// at most `tol` to the fixed point.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<ViSolution, ViError> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(ViError::InvalidTolerance(tol));
        }
        let gamma = self.problem.discount;
        let threshold = if gamma > 0.0 {
            tol * (1.0 - gamma) / (2.0 * gamma)
        } else {
            // One sweep is exact when γ = 0; the next confirms.
            tol
        };

        let k = self.problem.horizon_cap as usize;
        let n = self.grid.len();
        let mut values = vec![vec![0.0; n]; k + 1];
        let mut sup_diffs = Vec::new();

        for iteration in 1..=max_iter {
            let updated = self.bellman_backup(&values);
            let diff = sup_diff(&values, &updated);
            sup_diffs.push(diff);
            values = updated;
            if diff <= threshold {
                return Ok(ViSolution {
                    values,
                    iterations: iteration,
                    sup_diffs,
                });
            }
        }

        Err(ViError::NotConverged {
            max_iter,
            last_diff: sup_diffs.last().copied().unwrap_or(f64::INFINITY),
            threshold,
        })
    }
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (va, vb) in ra.iter().zip(rb) {
            worst = worst.max((va - vb).abs());
        }
    }
    worst
}
