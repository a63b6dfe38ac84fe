//! Binary dynamic search (BiDS) for reset-control problems.
//!
//! Instead of iterating a fixed-point operator over the whole value
//! function, the solver exploits the reset structure: guessing a scalar
//! trial value `v` for the reset state determines the entire table
//! `V(x, t, v)` through one finite backward pass, and propagating that
//! table back to the reset state yields an implied value `Υ(v)`. `Υ` is
//! monotone increasing with slope at most `γ < 1`, so `v = Υ(v)` has a
//! unique fixed point — the optimal cost-to-go at the reset state — and a
//! scalar bisection finds it to any tolerance `ε` in
//! `⌈log₂(v̄₀/ε)⌉` backward passes.

use crate::grid::StateGrid;
use crate::kernel::{tie_tolerance, ExpectationKernel, KernelError};
use crate::noise::DiscreteNoise;
use crate::problem::{ResetModel, ResetProblem};
use rayon::prelude::*;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("problem instance rejected:\n{0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(
        "bracket invariant violated: implied value {implied} exceeds the initial upper bound {upper}; \
         the problem evaluators break the monotone-contraction structure the search relies on"
    )]
    BracketInvariant { upper: f64, implied: f64 },
}

/// Search bracket `[lower, upper]`; the fixed point stays inside after
/// every update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }
}

/// One evaluation of the scalar map: trial value in, implied value out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketSample {
    pub trial: f64,
    pub implied: f64,
}

/// Everything a solve produces.
#[derive(Debug)]
pub struct SolveReport {
    /// Fixed-point approximation of the reset-state value.
    pub v_star: f64,
    /// Backward-pass table at `v_star`.
    pub value_table: ValueTable,
    pub policy: PolicyTable,
    /// Bisection iterations (midpoint evaluations). The initial
    /// upper-bound check and the final table rebuild are not counted.
    pub iterations: usize,
    /// Every `(trial, implied)` evaluation in order, including the initial
    /// upper-bound check and the final rebuild at `v_star`.
    pub bracket_history: Vec<BracketSample>,
    pub epsilon: f64,
    /// Initial bracket upper end `v̄₀`.
    pub upper_bound: f64,
    /// Final bracket after termination (width ≤ ε).
    pub bracket: Bracket,
    pub wall_time: Duration,
}

impl SolveReport {
    /// `⌈log₂(v̄₀/ε)⌉ + 1`, the guaranteed cap on bisection iterations.
    pub fn iteration_bound(&self) -> usize {
        iteration_bound(self.upper_bound, self.epsilon)
    }
}

pub fn iteration_bound(upper_bound: f64, epsilon: f64) -> usize {
    if upper_bound <= epsilon {
        return 1;
    }
    (upper_bound / epsilon).log2().ceil().max(0.0) as usize + 1
}

use crate::table::{PolicyAction, PolicyTable, ValueTable};

pub struct BidsSolver<'a, M: ResetModel> {
    problem: &'a ResetProblem<M>,
    grid: &'a StateGrid,
    noise: &'a DiscreteNoise,
    kernel: ExpectationKernel,
}

impl<'a, M: ResetModel> BidsSolver<'a, M> {
    /// Builds the expectation kernel and rejects structurally inadmissible
    /// instances (bad discount, empty controls, nonzero reset cost at the
    /// reset state, negative or non-finite costs anywhere on the lattice).
    pub fn new(
        problem: &'a ResetProblem<M>,
        grid: &'a StateGrid,
        noise: &'a DiscreteNoise,
    ) -> Result<Self, SolveError> {
        check_structure(problem, grid, noise)?;
        let kernel = ExpectationKernel::build(problem, grid, noise)?;
        Ok(Self {
            problem,
            grid,
            noise,
            kernel,
        })
    }

    pub fn grid(&self) -> &StateGrid {
        self.grid
    }

    /// Initial bracket upper end:
    /// `v̄₀ = (1/(1−γ)) · min_u E[g(ζ,0,u,w₀) + γ·s(h(ζ,0,u,w₀),1,w₁)]`,
    /// the cost of resetting every period forever, with the double
    /// expectation over independent atom pairs.
    pub fn upper_bound(&self) -> f64 {
        let zeta = self.problem.reset_state;
        let gamma = self.problem.discount;
        let per_control: Vec<f64> = self
            .problem
            .control_grid
            .par_iter()
            .map(|&u| {
                let mut acc = 0.0;
                for a in self.noise.atoms() {
                    let g = self.problem.model.stage_cost(zeta, 0, u, a.value);
                    let next = self.problem.model.dynamics(zeta, 0, u, a.value);
                    let mut reset_term = 0.0;
                    for b in self.noise.atoms() {
                        reset_term += b.probability * self.problem.model.reset_cost(next, 1, b.value);
                    }
                    acc += a.probability * (g + gamma * reset_term);
                }
                acc
            })
            .collect();
        let mut best = f64::INFINITY;
        for v in per_control {
            if v < best {
                best = v;
            }
        }
        best / (1.0 - gamma)
    }

    /// One backward evaluation of the recursion at trial value `v`:
    ///
    /// ```text
    /// V(x,k,v) = v + E[s(x,k,w)]
    /// V(x,t,v) = min{ v + E[s(x,t,w)],
    ///                 min_u E[g(x,t,u,w) + γ·V̂(h(x,t,u,w), t+1, v)] }
    /// Υ(v)     = min_u E[g(ζ,0,u,w) + γ·V̂(h(ζ,0,u,w), 1, v)]
    /// ```
    ///
    /// Returns the full table and the implied reset-state value `Υ(v)`.
    pub fn backward_pass(&self, v: f64) -> (ValueTable, f64) {
        let k = self.problem.horizon_cap;
        let n = self.grid.len();
        let mut stages = vec![Vec::new(); k as usize + 1];

        stages[k as usize] = (0..n)
            .map(|i| v + self.kernel.expected_reset_cost(i, k))
            .collect();

        for age in (0..k).rev() {
            let (lower, upper) = stages.split_at_mut(age as usize + 1);
            let next = &upper[0];
            lower[age as usize] = (0..n)
                .into_par_iter()
                .map(|i| {
                    let reset_branch = v + self.kernel.expected_reset_cost(i, age);
                    let continue_branch = self.kernel.min_continuation_value(i, age, next);
                    reset_branch.min(continue_branch)
                })
                .collect();
        }

        let implied = self.kernel.min_reset_continuation_value(&stages[1]);
        (ValueTable::new(stages, v), implied)
    }

    /// Bisection for the fixed point of the implied-value map.
    ///
    /// The initial bracket is `[0, v̄₀]`. The implied value at the upper end
    /// is evaluated first: costs are nonnegative so the fixed point cannot
    /// sit below zero, and if it sat above `v̄₀` the bracket updates could
    /// never converge, so that case aborts with a diagnostic.
    pub fn solve(&self, epsilon: f64) -> Result<SolveReport, SolveError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(SolveError::InvalidEpsilon(epsilon));
        }
        let start = Instant::now();
        let upper_bound = self.upper_bound();
        let mut history = Vec::new();

        let (_, implied_at_upper) = self.backward_pass(upper_bound);
        history.push(BracketSample {
            trial: upper_bound,
            implied: implied_at_upper,
        });
        let guard = 1e-9 * (1.0 + upper_bound.abs());
        if implied_at_upper > upper_bound + guard {
            return Err(SolveError::BracketInvariant {
                upper: upper_bound,
                implied: implied_at_upper,
            });
        }

        let mut bracket = Bracket {
            lower: 0.0,
            upper: upper_bound,
        };
        if implied_at_upper == upper_bound {
            // Exact fixed point at the upper end.
            bracket.lower = upper_bound;
        }

        let mut iterations = 0;
        while bracket.width() > epsilon {
            let trial = bracket.midpoint();
            if trial <= bracket.lower || trial >= bracket.upper {
                break; // bracket no longer splittable in f64
            }
            let (_, implied) = self.backward_pass(trial);
            iterations += 1;
            history.push(BracketSample { trial, implied });
            if implied > trial {
                // Υ is monotone with slope < 1, so the fixed point lies above.
                bracket.lower = trial;
            } else if implied < trial {
                bracket.upper = trial;
            } else {
                bracket.lower = trial;
                bracket.upper = trial;
            }
        }

        let v_star = bracket.midpoint();
        let (value_table, implied_at_star) = self.backward_pass(v_star);
        history.push(BracketSample {
            trial: v_star,
            implied: implied_at_star,
        });
        let policy = self.extract_policy(&value_table);

        Ok(SolveReport {
            v_star,
            value_table,
            policy,
            iterations,
            bracket_history: history,
            epsilon,
            upper_bound,
            bracket,
            wall_time: start.elapsed(),
        })
    }

    /// Minimizing arguments of the final table: per `(x_i, t < k)` the
    /// reset flag is set only when the reset branch beats the continuation
    /// by more than a tie tolerance (ties keep the tank running), the
    /// continuation control is the smallest minimizer, and every reset —
    /// including the forced one at `t = k` — applies the post-reset
    /// one-step minimizer computed at the reset state.
    pub fn extract_policy(&self, table: &ValueTable) -> PolicyTable {
        let k = self.problem.horizon_cap;
        let n = self.grid.len();
        let v = table.trial_value();

        let (_, zeta_control_index) = self.kernel.min_reset_continuation(table.stage(1));
        let zeta_control = self.problem.control_grid[zeta_control_index];

        let mut actions = Vec::with_capacity(k as usize + 1);
        for age in 0..k {
            let next = table.stage(age + 1);
            let row: Vec<PolicyAction> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let reset_branch = v + self.kernel.expected_reset_cost(i, age);
                    let (continue_branch, control_index) =
                        self.kernel.min_continuation(i, age, next);
                    if reset_branch < continue_branch - tie_tolerance(continue_branch) {
                        PolicyAction {
                            reset: true,
                            control: zeta_control,
                        }
                    } else {
                        PolicyAction {
                            reset: false,
                            control: self.problem.control_grid[control_index],
                        }
                    }
                })
                .collect();
            actions.push(row);
        }
        actions.push(vec![
            PolicyAction {
                reset: true,
                control: zeta_control,
            };
            n
        ]);
        PolicyTable::new(actions)
    }
}

fn check_structure<M: ResetModel>(
    problem: &ResetProblem<M>,
    grid: &StateGrid,
    noise: &DiscreteNoise,
) -> Result<(), SolveError> {
    let mut problems = Vec::new();
    if !(0.0..1.0).contains(&problem.discount) {
        problems.push(format!(
            "discount {} out of range [0, 1)",
            problem.discount
        ));
    }
    if problem.horizon_cap == 0 {
        problems.push("horizon cap must be at least 1".to_string());
    }
    if problem.control_grid.is_empty() {
        problems.push("control grid is empty".to_string());
    }
    if problem
        .control_grid
        .windows(2)
        .any(|pair| pair[1] <= pair[0])
    {
        problems.push("control grid not sorted strictly ascending".to_string());
    }
    if !grid.contains(problem.reset_state) {
        problems.push(format!(
            "reset state {} outside grid range [{}, {}]",
            problem.reset_state,
            grid.lower(),
            grid.upper()
        ));
    }
    for age in 0..=problem.horizon_cap {
        for (atom, a) in noise.atoms().iter().enumerate() {
            let s = problem.model.reset_cost(problem.reset_state, age, a.value);
            if s != 0.0 {
                problems.push(format!(
                    "reset cost must vanish at the reset state: s(ζ, {age}, atom {atom}) = {s}"
                ));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SolveError::InvalidProblem(problems.join("\n")))
    }
}
