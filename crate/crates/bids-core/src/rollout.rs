//! Monte Carlo validation of exported policies.
//!
//! Episodes replay the tank dynamics under a policy table with fresh
//! demand draws — not the solver's discretization atoms — so the estimate
//! probes the policy itself rather than the discretization. States are
//! mapped to table entries by nearest grid point.

use crate::problem::ResetModel;
use crate::table::PolicyTable;
use crate::water::WaterInstance;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub mean_discounted_cost: f64,
    /// Sample standard deviation of per-episode discounted cost divided by
    /// `√episodes`.
    pub std_error: f64,
    /// Fraction of simulated days with unmet demand.
    pub shortfall_day_frequency: f64,
    /// Fraction of simulated days the tank was flushed.
    pub flush_day_frequency: f64,
    pub mean_order_liters: f64,
    pub episodes: usize,
    /// Number of simulated stages per episode; chosen so the truncated
    /// discounted tail is below the requested bound.
    pub effective_horizon: usize,
}

struct EpisodeOutcome {
    discounted_cost: f64,
    shortfall_days: usize,
    flush_days: usize,
    order_total: f64,
}

/// Worst-case single-stage cost, used only to size the truncation horizon.
/// Demand is proxied by the largest discretization atom.
fn one_stage_cost_bound(instance: &WaterInstance) -> f64 {
    let x_max = instance.grid.upper();
    let u_max = instance
        .problem
        .control_grid
        .last()
        .copied()
        .unwrap_or(0.0);
    let d_big = instance.noise.max_value().max(0.0);
    let p = &instance.params;
    p.purchase_cost * u_max
        + p.shortage_penalty * d_big
        + p.holding_slope * p.horizon_cap as f64 * (x_max + u_max)
        + p.flush_penalty * x_max
}

/// Smallest `n ≥ 1` with `γⁿ·bound/(1-γ) ≤ delta_tail`.
pub fn effective_horizon(discount: f64, bound: f64, delta_tail: f64) -> usize {
    assert!(delta_tail > 0.0, "delta_tail must be positive");
    if discount <= 0.0 {
        return 1;
    }
    let tail_at_zero = bound / (1.0 - discount);
    if tail_at_zero <= delta_tail {
        return 1;
    }
    let n = (delta_tail * (1.0 - discount) / bound).ln() / discount.ln();
    (n.ceil() as usize).max(1)
}

/// Simulates `episodes` trajectories from the freshly reset state under
/// `policy`, each with its own deterministic random stream derived from
/// `seed`, and accumulates discounted cost and operating statistics.
pub fn rollout(
    instance: &WaterInstance,
    policy: &PolicyTable,
    episodes: usize,
    delta_tail: f64,
    seed: u64,
) -> RolloutStats {
    assert!(episodes > 0, "need at least one episode");
    assert_eq!(
        policy.horizon_cap(),
        instance.problem.horizon_cap,
        "policy horizon does not match the instance"
    );
    assert_eq!(
        policy.grid_len(),
        instance.grid.len(),
        "policy grid does not match the instance"
    );

    let horizon = effective_horizon(
        instance.problem.discount,
        one_stage_cost_bound(instance),
        delta_tail,
    );

    let outcomes: Vec<EpisodeOutcome> = (0..episodes)
        .into_par_iter()
        .map(|episode| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(episode as u64 + 1);
            run_episode(instance, policy, horizon, &mut rng)
        })
        .collect();

    let n_days = (episodes * horizon) as f64;
    let mean = outcomes
        .iter()
        .map(|o| o.discounted_cost)
        .sum::<f64>()
        / episodes as f64;
    let variance = if episodes > 1 {
        outcomes
            .iter()
            .map(|o| (o.discounted_cost - mean).powi(2))
            .sum::<f64>()
            / (episodes - 1) as f64
    } else {
        0.0
    };

    RolloutStats {
        mean_discounted_cost: mean,
        std_error: (variance / episodes as f64).sqrt(),
        shortfall_day_frequency: outcomes.iter().map(|o| o.shortfall_days).sum::<usize>() as f64
            / n_days,
        flush_day_frequency: outcomes.iter().map(|o| o.flush_days).sum::<usize>() as f64 / n_days,
        mean_order_liters: outcomes.iter().map(|o| o.order_total).sum::<f64>() / n_days,
        episodes,
        effective_horizon: horizon,
    }
}

fn run_episode(
    instance: &WaterInstance,
    policy: &PolicyTable,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> EpisodeOutcome {
    let model = &instance.problem.model;
    let k = instance.problem.horizon_cap;
    let mut level = instance.problem.reset_state;
    let mut age: u32 = 0;
    let mut discount_pow = 1.0;
    let mut outcome = EpisodeOutcome {
        discounted_cost: 0.0,
        shortfall_days: 0,
        flush_days: 0,
        order_total: 0.0,
    };

    for _ in 0..horizon {
        let action = policy.lookup(&instance.grid, level, age);
        assert!(
            !(age == k && !action.reset),
            "policy violates the forced reset at age {k}"
        );
        let demand = instance.params.demand.sample(rng);

        let (pre_level, pre_age) = if action.reset {
            (instance.problem.reset_state, 0)
        } else {
            (level, age)
        };

        let mut stage = model.stage_cost(pre_level, pre_age, action.control, demand);
        if action.reset {
            stage += model.reset_cost(level, age, demand);
            outcome.flush_days += 1;
        }
        outcome.discounted_cost += discount_pow * stage;
        outcome.order_total += action.control;
        if pre_level + action.control - demand < 0.0 {
            outcome.shortfall_days += 1;
        }

        level = model.dynamics(pre_level, pre_age, action.control, demand);
        age = pre_age + 1;
        debug_assert!(level >= 0.0, "tank level went negative");
        debug_assert!(age <= k, "age exceeded the horizon cap");
        discount_pow *= instance.problem.discount;
    }

    outcome
}
