//! Problem definition contracts for reset-control problems.
//!
//! A reset-control problem is a discounted stochastic control problem with
//! one extra binary control: resetting the system to a single known state
//! `ζ` at a state-dependent cost, subject to a hard cap `k` on the number
//! of stages between resets. The age component `t` counts stages since the
//! last reset.

use crate::grid::StateGrid;
use crate::noise::DiscreteNoise;

/// Model evaluators for one problem instance.
///
/// * `dynamics` maps the pseudo-state `(ξ, τ)` plus a control and
///   disturbance to the next state.
/// * `stage_cost` is the per-stage running cost, evaluated at the
///   pseudo-state.
/// * `reset_cost` is charged when the reset control fires, evaluated at the
///   pre-decision state.
///
/// Evaluators must be pure: the solvers evaluate them in parallel over grid
/// points and rely on identical results for identical arguments.
pub trait ResetModel: Sync {
    fn dynamics(&self, state: f64, age: u32, control: f64, noise: f64) -> f64;
    fn stage_cost(&self, state: f64, age: u32, control: f64, noise: f64) -> f64;
    fn reset_cost(&self, state: f64, age: u32, noise: f64) -> f64;
}

/// Adapter for building models out of closures, mainly for tests and small
/// experiments.
pub struct ClosureModel<H, G, S> {
    pub dynamics: H,
    pub stage_cost: G,
    pub reset_cost: S,
}

impl<H, G, S> ResetModel for ClosureModel<H, G, S>
where
    H: Fn(f64, u32, f64, f64) -> f64 + Sync,
    G: Fn(f64, u32, f64, f64) -> f64 + Sync,
    S: Fn(f64, u32, f64) -> f64 + Sync,
{
    fn dynamics(&self, state: f64, age: u32, control: f64, noise: f64) -> f64 {
        (self.dynamics)(state, age, control, noise)
    }

    fn stage_cost(&self, state: f64, age: u32, control: f64, noise: f64) -> f64 {
        (self.stage_cost)(state, age, control, noise)
    }

    fn reset_cost(&self, state: f64, age: u32, noise: f64) -> f64 {
        (self.reset_cost)(state, age, noise)
    }
}

/// One instance of the reset-control problem class.
#[derive(Debug, Clone)]
pub struct ResetProblem<M: ResetModel> {
    /// State the system jumps to when the reset control fires.
    pub reset_state: f64,
    /// Maximum number of stages between resets (`k ≥ 1`).
    pub horizon_cap: u32,
    /// Discount factor in `[0, 1)`.
    pub discount: f64,
    /// Admissible control values, sorted ascending.
    pub control_grid: Vec<f64>,
    pub model: M,
}

impl<M: ResetModel> ResetProblem<M> {
    /// `Σ_i p_i · g(state, age, control, w_i)`.
    pub fn expected_stage_cost(
        &self,
        state: f64,
        age: u32,
        control: f64,
        noise: &DiscreteNoise,
    ) -> f64 {
        noise.expectation(|w| self.model.stage_cost(state, age, control, w))
    }

    /// `Σ_i p_i · s(state, age, w_i)`.
    pub fn expected_reset_cost(&self, state: f64, age: u32, noise: &DiscreteNoise) -> f64 {
        noise.expectation(|w| self.model.reset_cost(state, age, w))
    }
}

/// Pseudo-state entering the dynamics and stage cost within one period,
/// after the reset decision has been applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetTransition {
    pub pre_state: f64,
    pub pre_age: u32,
}

impl ResetTransition {
    pub fn new(state: f64, age: u32, reset: bool, reset_state: f64) -> Self {
        if reset {
            Self {
                pre_state: reset_state,
                pre_age: 0,
            }
        } else {
            Self {
                pre_state: state,
                pre_age: age,
            }
        }
    }
}

/// One structural violation found by [`validate_problem`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DiscountOutOfRange {
        discount: f64,
    },
    HorizonCapZero,
    ControlGridEmpty,
    ControlGridUnsorted {
        index: usize,
    },
    ResetStateOutsideGrid {
        reset_state: f64,
        lower: f64,
        upper: f64,
    },
    /// `s(ζ, t, w)` must vanish for every age and atom.
    ResetCostNonzeroAtResetState {
        age: u32,
        atom: usize,
        value: f64,
    },
    NegativeStageCost {
        state_index: usize,
        age: u32,
        control_index: usize,
        atom: usize,
        value: f64,
    },
    NegativeResetCost {
        state_index: usize,
        age: u32,
        atom: usize,
        value: f64,
    },
    NonFiniteProbabilitySum {
        sum: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DiscountOutOfRange { discount } => {
                write!(f, "discount out of range: {discount} not in [0, 1)")
            }
            Violation::HorizonCapZero => write!(f, "horizon cap must be at least 1"),
            Violation::ControlGridEmpty => write!(f, "control grid is empty"),
            Violation::ControlGridUnsorted { index } => {
                write!(f, "control grid not sorted ascending at index {index}")
            }
            Violation::ResetStateOutsideGrid {
                reset_state,
                lower,
                upper,
            } => write!(
                f,
                "reset state {reset_state} outside grid range [{lower}, {upper}]"
            ),
            Violation::ResetCostNonzeroAtResetState { age, atom, value } => {
                write!(f, "s(ζ) ≠ 0: reset cost {value} at age {age}, atom {atom}")
            }
            Violation::NegativeStageCost {
                state_index,
                age,
                control_index,
                atom,
                value,
            } => write!(
                f,
                "negative stage cost {value} at x[{state_index}], t={age}, u[{control_index}], atom {atom}"
            ),
            Violation::NegativeResetCost {
                state_index,
                age,
                atom,
                value,
            } => write!(
                f,
                "negative reset cost {value} at x[{state_index}], t={age}, atom {atom}"
            ),
            Violation::NonFiniteProbabilitySum { sum } => {
                write!(f, "noise probabilities sum to non-finite value {sum}")
            }
        }
    }
}

/// Diagnostic report; an empty report means the instance is admissible.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "instance admissible");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Checks every structural condition the solvers rely on: nonnegative costs
/// on the whole grid × control × atom lattice, zero reset cost at the reset
/// state, discount in range, sorted nonempty controls, and the reset state
/// lying inside the grid.
pub fn validate_problem<M: ResetModel>(
    problem: &ResetProblem<M>,
    grid: &StateGrid,
    noise: &DiscreteNoise,
) -> ValidationReport {
    let mut report = ValidationReport::default();

    if !(0.0..1.0).contains(&problem.discount) {
        report.violations.push(Violation::DiscountOutOfRange {
            discount: problem.discount,
        });
    }
    if problem.horizon_cap == 0 {
        report.violations.push(Violation::HorizonCapZero);
    }
    if problem.control_grid.is_empty() {
        report.violations.push(Violation::ControlGridEmpty);
    }
    for (index, pair) in problem.control_grid.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            report
                .violations
                .push(Violation::ControlGridUnsorted { index: index + 1 });
        }
    }
    if !grid.contains(problem.reset_state) {
        report.violations.push(Violation::ResetStateOutsideGrid {
            reset_state: problem.reset_state,
            lower: grid.lower(),
            upper: grid.upper(),
        });
    }
    let prob_sum: f64 = noise.atoms().iter().map(|a| a.probability).sum();
    if !prob_sum.is_finite() {
        report
            .violations
            .push(Violation::NonFiniteProbabilitySum { sum: prob_sum });
    }

    for age in 0..=problem.horizon_cap {
        for (atom, a) in noise.atoms().iter().enumerate() {
            let s = problem.model.reset_cost(problem.reset_state, age, a.value);
            if s != 0.0 {
                report.violations.push(Violation::ResetCostNonzeroAtResetState {
                    age,
                    atom,
                    value: s,
                });
            }
        }
    }

    for state_index in 0..grid.len() {
        let x = grid.point(state_index);
        for age in 0..=problem.horizon_cap {
            for (atom, a) in noise.atoms().iter().enumerate() {
                let s = problem.model.reset_cost(x, age, a.value);
                if s < 0.0 {
                    report.violations.push(Violation::NegativeResetCost {
                        state_index,
                        age,
                        atom,
                        value: s,
                    });
                }
            }
            for (control_index, &u) in problem.control_grid.iter().enumerate() {
                for (atom, a) in noise.atoms().iter().enumerate() {
                    let g = problem.model.stage_cost(x, age, u, a.value);
                    if g < 0.0 {
                        report.violations.push(Violation::NegativeStageCost {
                            state_index,
                            age,
                            control_index,
                            atom,
                            value: g,
                        });
                    }
                }
            }
        }
    }

    report
}
