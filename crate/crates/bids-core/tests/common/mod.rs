//! Shared oracle machinery for the integration suites. Everything here is
//! deliberately independent of the library's solver path: the backward
//! recursion is re-evaluated straight from the problem evaluators, the
//! demand density is summed in its series form, and integrals come from
//! adaptive Simpson quadrature.

#![allow(dead_code)]

use bids_core::grid::StateGrid;
use bids_core::noise::DiscreteNoise;
use bids_core::problem::{ResetModel, ResetProblem};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Randomized reset-control instances
// ---------------------------------------------------------------------------

/// Coefficient-driven model family: contractive-ish linear dynamics,
/// nonnegative quadratic-plus-linear stage cost, reset cost proportional
/// to the distance from the reset state (zero there by construction).
#[derive(Debug, Clone, Copy)]
pub struct CoefModel {
    pub contraction: f64,
    pub control_gain: f64,
    pub noise_gain: f64,
    pub quad_center: f64,
    pub quad_weight: f64,
    pub control_weight: f64,
    pub age_weight: f64,
    pub noise_weight: f64,
    pub reset_slope: f64,
    pub reset_state: f64,
}

impl ResetModel for CoefModel {
    fn dynamics(&self, state: f64, _age: u32, control: f64, noise: f64) -> f64 {
        self.contraction * state + self.control_gain * control + self.noise_gain * noise
    }

    fn stage_cost(&self, state: f64, age: u32, control: f64, noise: f64) -> f64 {
        self.quad_weight * (state - self.quad_center).powi(2)
            + self.control_weight * control
            + self.age_weight * age as f64
            + self.noise_weight * noise
    }

    fn reset_cost(&self, state: f64, _age: u32, _noise: f64) -> f64 {
        self.reset_slope * (state - self.reset_state).abs()
    }
}

pub struct TestInstance {
    pub problem: ResetProblem<CoefModel>,
    pub grid: StateGrid,
    pub noise: DiscreteNoise,
}

/// Deterministic random instance: small grid, short horizon, a handful of
/// controls and atoms, discount in [0.5, 0.95]. The reset state sits on a
/// grid node so the piecewise-linear reset cost interpolates exactly.
pub fn random_instance(rng: &mut ChaCha8Rng) -> TestInstance {
    let n_x = rng.random_range(4..=16);
    let upper = rng.random_range(3.0..8.0);
    let grid = StateGrid::new(0.0, upper, n_x).unwrap();
    let horizon_cap = rng.random_range(1..=4);
    let discount = rng.random_range(0.5..0.95);

    let n_u = rng.random_range(1..=5);
    let mut control_grid: Vec<f64> = (0..n_u).map(|_| rng.random_range(0.0..2.0)).collect();
    control_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    control_grid.dedup();

    let n_atoms = rng.random_range(2..=6);
    let atoms: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(0.0..2.0)).collect();
    let noise = DiscreteNoise::equal_weight(atoms).unwrap();

    let reset_index = rng.random_range(0..n_x);
    let reset_state = grid.point(reset_index);

    let model = CoefModel {
        contraction: rng.random_range(0.3..0.95),
        control_gain: rng.random_range(0.2..1.0),
        noise_gain: rng.random_range(0.0..1.0),
        quad_center: rng.random_range(0.0..upper),
        quad_weight: rng.random_range(0.1..1.0),
        control_weight: rng.random_range(0.0..1.0),
        age_weight: rng.random_range(0.0..0.5),
        noise_weight: rng.random_range(0.0..0.5),
        reset_slope: rng.random_range(0.1..1.5),
        reset_state,
    };

    TestInstance {
        problem: ResetProblem {
            reset_state,
            horizon_cap,
            discount,
            control_grid,
            model,
        },
        grid,
        noise,
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Direct (kernel-free) evaluation of the backward recursion
// ---------------------------------------------------------------------------

/// Literal transcription of the recursion from the problem evaluators:
/// no precomputed expectations, no weight aggregation. Returns the stage
/// tables and the implied reset-state value.
pub fn direct_backward_pass<M: ResetModel>(
    problem: &ResetProblem<M>,
    grid: &StateGrid,
    noise: &DiscreteNoise,
    v: f64,
) -> (Vec<Vec<f64>>, f64) {
    let k = problem.horizon_cap;
    let n = grid.len();
    let mut stages = vec![vec![0.0; n]; k as usize + 1];

    for i in 0..n {
        stages[k as usize][i] = v + problem.expected_reset_cost(grid.point(i), k, noise);
    }
    for age in (0..k).rev() {
        for i in 0..n {
            let x = grid.point(i);
            let reset_branch = v + problem.expected_reset_cost(x, age, noise);
            let continue_branch = problem
                .control_grid
                .iter()
                .map(|&u| {
                    noise.expectation(|w| {
                        problem.model.stage_cost(x, age, u, w)
                            + problem.discount
                                * grid.interpolate(
                                    &stages[age as usize + 1],
                                    problem.model.dynamics(x, age, u, w),
                                )
                    })
                })
                .fold(f64::INFINITY, f64::min);
            stages[age as usize][i] = reset_branch.min(continue_branch);
        }
    }

    let zeta = problem.reset_state;
    let implied = problem
        .control_grid
        .iter()
        .map(|&u| {
            noise.expectation(|w| {
                problem.model.stage_cost(zeta, 0, u, w)
                    + problem.discount
                        * grid.interpolate(&stages[1], problem.model.dynamics(zeta, 0, u, w))
            })
        })
        .fold(f64::INFINITY, f64::min);

    (stages, implied)
}

/// Brute-force transcription of the upper-bound formula over explicit
/// atom pairs.
pub fn direct_upper_bound<M: ResetModel>(
    problem: &ResetProblem<M>,
    noise: &DiscreteNoise,
) -> f64 {
    let zeta = problem.reset_state;
    let gamma = problem.discount;
    let mut best = f64::INFINITY;
    for &u in &problem.control_grid {
        let mut acc = 0.0;
        for a in noise.atoms() {
            let g = problem.model.stage_cost(zeta, 0, u, a.value);
            let next = problem.model.dynamics(zeta, 0, u, a.value);
            let mut reset_term = 0.0;
            for b in noise.atoms() {
                reset_term += b.probability * problem.model.reset_cost(next, 1, b.value);
            }
            acc += a.probability * (g + gamma * reset_term);
        }
        if acc < best {
            best = acc;
        }
    }
    best / (1.0 - gamma)
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        return refined + (refined - whole) / 15.0;
    }
    simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

// ---------------------------------------------------------------------------
// Series form of the PRP density (independent of the Bessel route)
// ---------------------------------------------------------------------------

/// `Σ_{k≥1} (λμ)^k d^{k-1} e^{-λ-μd} / (k!(k-1)!)`, summed with
/// power-of-two rescaling so the inner sum never overflows, then assembled
/// in log space. Truncates when a term falls below 1e-18 of the partial
/// sum (past the peak of the unimodal term sequence).
pub fn prp_pdf_series(event_rate: f64, duration_rate: f64, d: f64) -> f64 {
    assert!(d > 0.0);
    let y = event_rate * duration_rate * d;
    const SCALE_DOWN: f64 = 7.458340731200207e-155; // 2^-512
    const LOG2_SCALE: f64 = 512.0;

    // T = Σ_{k≥1} y^k / (k!(k-1)!); term ratio y/(k(k+1)).
    let mut term = y;
    let mut sum = y;
    let mut shift_log2 = 0.0;
    let mut k = 1u64;
    loop {
        let ratio = y / (k as f64 * (k + 1) as f64);
        term *= ratio;
        sum += term;
        if term < 1e-18 * sum && ratio < 1.0 {
            break;
        }
        if sum > 1e250 {
            sum *= SCALE_DOWN;
            term *= SCALE_DOWN;
            shift_log2 += LOG2_SCALE;
        }
        k += 1;
    }

    let log_pdf = sum.ln() + shift_log2 * std::f64::consts::LN_2
        - event_rate
        - duration_rate * d
        - d.ln();
    log_pdf.exp()
}

/// Relative difference with a floor, so two underflowed zeros agree.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).abs() / scale
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov
// ---------------------------------------------------------------------------

/// One-sample KS statistic of `sorted_samples` against CDF values `cdf`
/// evaluated at those samples.
pub fn ks_statistic(cdf_at_samples: &[f64]) -> f64 {
    let n = cdf_at_samples.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &f) in cdf_at_samples.iter().enumerate() {
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        worst = worst.max(hi.max(lo));
    }
    worst
}

/// Asymptotic critical value `√(ln(2/α)/2)/√n`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    ((2.0 / alpha).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
