//! Solvers for discounted stochastic optimal control problems with
//! controlled resets to a single known state and a hard cap on the time
//! between resets.
//!
//! The centerpiece is binary dynamic search ([`solver::BidsSolver`]): the
//! optimal cost-to-go at the reset state is the unique fixed point of a
//! monotone scalar map, so a bisection over one real number — with one
//! finite backward pass per trial — replaces fixed-point iteration over
//! the whole value function. A synchronous value-iteration baseline
//! ([`vi::AugmentedMdp`]) solves the same discretized problem
//! independently and serves as the correctness oracle.
//!
//! The [`water`] module instantiates the problem this crate was built
//! around: managing a household water-storage tank under Poisson
//! rectangular pulse demand ([`prp`]), with purchase, shortage,
//! water-quality holding, and flush costs. [`rollout`] cross-validates
//! exported lookup-table policies by Monte Carlo simulation.

pub mod bessel;
pub mod grid;
pub mod kernel;
pub mod noise;
pub mod problem;
pub mod prp;
pub mod rollout;
pub mod solver;
pub mod table;
pub mod vi;
pub mod water;

pub use grid::StateGrid;
pub use noise::{DiscreteNoise, NoiseAtom};
pub use problem::{validate_problem, ClosureModel, ResetModel, ResetProblem, ResetTransition};
pub use prp::PrpParams;
pub use rollout::{rollout, RolloutStats};
pub use solver::{BidsSolver, Bracket, SolveError, SolveReport};
pub use table::{PolicyAction, PolicyTable, ValueTable};
pub use vi::{AugmentedMdp, ViSolution};
pub use water::{build_problem, classify_zones, WaterInstance, WaterParams};
