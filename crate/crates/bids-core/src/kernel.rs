//! Precomputed expectation and interpolation machinery.
//!
//! The backward recursion evaluates, for every `(x_i, t, u)`, the quantity
//! `E[g(x_i,t,u,w) + γ·V(h(x_i,t,u,w), t+1)]` where `V` is interpolated on
//! the state grid. Neither `E[g]` nor the interpolation weights of
//! `h(x_i,t,u,w)` depend on the table being propagated, so both are
//! evaluated once per `(state, age, control)` and reused across every
//! backward pass. Each entry stores the expected stage cost plus a compact
//! band of per-grid-node weights; a continuation value is then a single dot
//! product against the next stage's values.

use crate::grid::StateGrid;
use crate::noise::DiscreteNoise;
use crate::problem::{ResetModel, ResetProblem};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("{quantity} evaluated to non-finite value {value} at x[{state_index}]={state}, t={age}, u[{control_index}]={control}, atom {atom}")]
    NonFinite {
        quantity: &'static str,
        state_index: usize,
        state: f64,
        age: u32,
        control_index: usize,
        control: f64,
        atom: usize,
        value: f64,
    },
    #[error("negative {quantity} {value} at x[{state_index}]={state}, t={age}, u[{control_index}]={control}, atom {atom}")]
    Negative {
        quantity: &'static str,
        state_index: usize,
        state: f64,
        age: u32,
        control_index: usize,
        control: f64,
        atom: usize,
        value: f64,
    },
}

/// Expected stage cost plus expected-interpolation weights for one
/// `(state, age, control)` entry. The weights cover the contiguous grid
/// band `first_node..first_node + weights.len()` at the next stage-age.
#[derive(Debug)]
struct Band {
    first_node: u32,
    offset: usize,
    len: usize,
}

/// Compact row group: expected costs and weight bands for a fixed
/// `(state, age)` over all controls.
struct RowGroup {
    expected_g: Vec<f64>,
    bands: Vec<(u32, Vec<f64>)>,
}

#[derive(Debug)]
pub struct ExpectationKernel {
    n_states: usize,
    n_controls: usize,
    horizon_cap: u32,
    discount: f64,
    /// `E[s(x_i, t, ·)]`, indexed `t * n_states + i`, for `t = 0..=k`.
    expected_reset: Vec<f64>,
    /// `E[g(x_i, t, u, ·)]`, indexed `(t * n_states + i) * n_controls + u`,
    /// for `t = 0..k`.
    expected_g: Vec<f64>,
    bands: Vec<Band>,
    weights: Vec<f64>,
    /// Same data for the reset state `ζ` at age 0 (next stage-age 1).
    zeta_expected_g: Vec<f64>,
    zeta_bands: Vec<(u32, Vec<f64>)>,
}

impl ExpectationKernel {
    pub fn build<M: ResetModel>(
        problem: &ResetProblem<M>,
        grid: &StateGrid,
        noise: &DiscreteNoise,
    ) -> Result<Self, KernelError> {
        let n_states = grid.len();
        let n_controls = problem.control_grid.len();
        let k = problem.horizon_cap;

        // E[s] over the full (state, age) lattice, including the t = k
        // boundary row the recursion terminates on.
        let mut expected_reset = vec![0.0; (k as usize + 1) * n_states];
        for age in 0..=k {
            for i in 0..n_states {
                let x = grid.point(i);
                let mut acc = 0.0;
                for (atom, a) in noise.atoms().iter().enumerate() {
                    let s = problem.model.reset_cost(x, age, a.value);
                    check_cost("reset cost", s, i, x, age, 0, f64::NAN, atom)?;
                    acc += a.probability * s;
                }
                expected_reset[age as usize * n_states + i] = acc;
            }
        }

        // Continuation rows, parallel over (age, state).
        let rows: Vec<Result<RowGroup, KernelError>> = (0..k as usize * n_states)
            .into_par_iter()
            .map(|row| {
                let age = (row / n_states) as u32;
                let i = row % n_states;
                build_row(problem, grid, noise, grid.point(i), i, age)
            })
            .collect();

        let mut expected_g = Vec::with_capacity(k as usize * n_states * n_controls);
        let mut bands = Vec::with_capacity(k as usize * n_states * n_controls);
        let mut weights = Vec::new();
        for row in rows {
            let row = row?;
            for (eg, (first_node, w)) in row.expected_g.into_iter().zip(row.bands) {
                expected_g.push(eg);
                bands.push(Band {
                    first_node,
                    offset: weights.len(),
                    len: w.len(),
                });
                weights.extend_from_slice(&w);
            }
        }

        let zeta_row = build_row(problem, grid, noise, problem.reset_state, usize::MAX, 0)?;

        Ok(Self {
            n_states,
            n_controls,
            horizon_cap: k,
            discount: problem.discount,
            expected_reset,
            expected_g,
            bands,
            weights,
            zeta_expected_g: zeta_row.expected_g,
            zeta_bands: zeta_row.bands,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn horizon_cap(&self) -> u32 {
        self.horizon_cap
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// `E[s(x_i, t, ·)]`, bitwise identical to
    /// `ResetProblem::expected_reset_cost` at the same point.
    pub fn expected_reset_cost(&self, state_index: usize, age: u32) -> f64 {
        self.expected_reset[age as usize * self.n_states + state_index]
    }

    /// `E[g(x_i,t,u,w) + γ·V̂(h(x_i,t,u,w), t+1)]` for one control index,
    /// where `next` holds the stage `t+1` values.
    pub fn continuation(&self, state_index: usize, age: u32, control_index: usize, next: &[f64]) -> f64 {
        let entry = (age as usize * self.n_states + state_index) * self.n_controls + control_index;
        let band = &self.bands[entry];
        let w = &self.weights[band.offset..band.offset + band.len];
        let nodes = &next[band.first_node as usize..band.first_node as usize + band.len];
        let mut interp = 0.0;
        for (wi, vi) in w.iter().zip(nodes) {
            interp += wi * vi;
        }
        self.expected_g[entry] + self.discount * interp
    }

    /// Minimum continuation value over the control grid.
    pub fn min_continuation_value(&self, state_index: usize, age: u32, next: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for u in 0..self.n_controls {
            let c = self.continuation(state_index, age, u, next);
            if c < best {
                best = c;
            }
        }
        best
    }

    /// Minimum continuation over the control grid; returns the value and
    /// the smallest control index attaining it within a relative tie
    /// tolerance.
    pub fn min_continuation(&self, state_index: usize, age: u32, next: &[f64]) -> (f64, usize) {
        let best = self.min_continuation_value(state_index, age, next);
        let tie = tie_tolerance(best);
        for u in 0..self.n_controls {
            if self.continuation(state_index, age, u, next) <= best + tie {
                return (best, u);
            }
        }
        unreachable!("minimum exists over a nonempty control grid")
    }

    /// Minimum continuation value from the reset state at age 0,
    /// propagating stage-age 1 values: the scalar map the fixed-point
    /// search drives to its fixed point.
    pub fn min_reset_continuation_value(&self, stage_one: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for u in 0..self.n_controls {
            let c = self.zeta_continuation(u, stage_one);
            if c < best {
                best = c;
            }
        }
        best
    }

    /// Same as [`Self::min_reset_continuation_value`] together with the
    /// smallest minimizing control index.
    pub fn min_reset_continuation(&self, stage_one: &[f64]) -> (f64, usize) {
        let best = self.min_reset_continuation_value(stage_one);
        let tie = tie_tolerance(best);
        for u in 0..self.n_controls {
            if self.zeta_continuation(u, stage_one) <= best + tie {
                return (best, u);
            }
        }
        unreachable!("minimum exists over a nonempty control grid")
    }

    fn zeta_continuation(&self, control_index: usize, stage_one: &[f64]) -> f64 {
        let (first_node, w) = &self.zeta_bands[control_index];
        let nodes = &stage_one[*first_node as usize..*first_node as usize + w.len()];
        let mut interp = 0.0;
        for (wi, vi) in w.iter().zip(nodes) {
            interp += wi * vi;
        }
        self.zeta_expected_g[control_index] + self.discount * interp
    }
}

/// Absolute slack used when picking the smallest minimizing control.
pub fn tie_tolerance(value: f64) -> f64 {
    1e-9 * (1.0 + value.abs())
}

fn build_row<M: ResetModel>(
    problem: &ResetProblem<M>,
    grid: &StateGrid,
    noise: &DiscreteNoise,
    x: f64,
    state_index: usize,
    age: u32,
) -> Result<RowGroup, KernelError> {
    let n = grid.len();
    let mut expected_g = Vec::with_capacity(problem.control_grid.len());
    let mut bands = Vec::with_capacity(problem.control_grid.len());
    let mut scratch = vec![0.0; n];

    for (control_index, &u) in problem.control_grid.iter().enumerate() {
        let mut eg = 0.0;
        let mut lo = n;
        let mut hi = 0usize;
        for (atom, a) in noise.atoms().iter().enumerate() {
            let g = problem.model.stage_cost(x, age, u, a.value);
            check_cost("stage cost", g, state_index, x, age, control_index, u, atom)?;
            eg += a.probability * g;

            let next = problem.model.dynamics(x, age, u, a.value);
            if !next.is_finite() {
                return Err(KernelError::NonFinite {
                    quantity: "dynamics",
                    state_index,
                    state: x,
                    age,
                    control_index,
                    control: u,
                    atom,
                    value: next,
                });
            }
            let (cell, frac) = grid.locate(next);
            scratch[cell] += a.probability * (1.0 - frac);
            scratch[cell + 1] += a.probability * frac;
            lo = lo.min(cell);
            hi = hi.max(cell + 1);
        }
        let band: Vec<f64> = scratch[lo..=hi].to_vec();
        scratch[lo..=hi].iter_mut().for_each(|w| *w = 0.0);
        expected_g.push(eg);
        bands.push((lo as u32, band));
    }

    Ok(RowGroup { expected_g, bands })
}

#[allow(clippy::too_many_arguments)]
fn check_cost(
    quantity: &'static str,
    value: f64,
    state_index: usize,
    state: f64,
    age: u32,
    control_index: usize,
    control: f64,
    atom: usize,
) -> Result<(), KernelError> {
    if !value.is_finite() {
        return Err(KernelError::NonFinite {
            quantity,
            state_index,
            state,
            age,
            control_index,
            control,
            atom,
            value,
        });
    }
    if value < 0.0 {
        return Err(KernelError::Negative {
            quantity,
            state_index,
            state,
            age,
            control_index,
            control,
            atom,
            value,
        });
    }
    Ok(())
}
