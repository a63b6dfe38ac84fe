//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured numbers (run with `-- --nocapture` to see them).

mod common;

use bids_core::prp::PrpParams;
use bids_core::rollout::rollout;
use bids_core::solver::{iteration_bound, BidsSolver, SolveReport};
use bids_core::vi::AugmentedMdp;
use bids_core::water::{build_problem, classify_zones, WaterInstance, WaterParams, ZoneLabel};
use common::{
    adaptive_simpson, ks_critical, ks_statistic, prp_pdf_series, random_instance, rel_diff,
    seeded_rng, TestInstance,
};
use rand::Rng;
use std::sync::OnceLock;
use std::time::Instant;

// ---------------------------------------------------------------------------
// Shared solves
// ---------------------------------------------------------------------------

const VI_TOL: f64 = 1e-6;
const SMALL_EPSILON: f64 = 1e-2;

struct SmallBattery {
    solves: Vec<(TestInstance, SolveReport)>,
    elapsed_secs: f64,
}

fn small_battery() -> &'static SmallBattery {
    static BATTERY: OnceLock<SmallBattery> = OnceLock::new();
    BATTERY.get_or_init(|| {
        let start = Instant::now();
        let mut rng = seeded_rng(0x5EED_0001);
        let mut solves = Vec::new();
        for _ in 0..20 {
            let instance = random_instance(&mut rng);
            let report = {
                let solver =
                    BidsSolver::new(&instance.problem, &instance.grid, &instance.noise).unwrap();
                solver.solve(SMALL_EPSILON).unwrap()
            };
            solves.push((instance, report));
        }
        SmallBattery {
            solves,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    })
}

struct WaterArtifacts {
    instance: WaterInstance,
    coarse: SolveReport,
    fine: SolveReport,
    elapsed_secs: f64,
}

fn water_artifacts() -> &'static WaterArtifacts {
    static WATER: OnceLock<WaterArtifacts> = OnceLock::new();
    WATER.get_or_init(|| {
        let start = Instant::now();
        let instance = build_problem(&WaterParams::default()).unwrap();
        let (coarse, fine) = {
            let solver =
                BidsSolver::new(&instance.problem, &instance.grid, &instance.noise).unwrap();
            (solver.solve(0.1).unwrap(), solver.solve(0.01).unwrap())
        };
        WaterArtifacts {
            instance,
            coarse,
            fine,
            elapsed_secs: start.elapsed().as_secs_f64(),
        }
    })
}

// ---------------------------------------------------------------------------
// Criterion 1: oracle equivalence against value iteration
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let battery = small_battery();
    let tolerance = SMALL_EPSILON + VI_TOL;
    let mut worst: f64 = 0.0;

    for (idx, (instance, report)) in battery.solves.iter().enumerate() {
        let mdp = AugmentedMdp::new(&instance.problem, &instance.grid, &instance.noise);
        let vi = mdp.solve(VI_TOL, 1_000_000).unwrap();
        let mut dev: f64 = 0.0;
        for age in 0..=instance.problem.horizon_cap {
            for i in 0..instance.grid.len() {
                dev = dev.max((report.value_table.value(i, age) - vi.values[age as usize][i]).abs());
            }
        }
        assert!(
            dev <= tolerance,
            "instance {idx}: max |V - J| = {dev} exceeds {tolerance}"
        );
        worst = worst.max(dev);
    }

    let total = battery.elapsed_secs + start.elapsed().as_secs_f64();
    assert!(total < 30.0, "criterion 1 took {total:.1}s, cap is 30s");
    println!(
        "acceptance criterion 1 (oracle equivalence): PASS — 20 instances, max deviation {worst:.3e} ≤ {tolerance:.3e}, {total:.2}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: bisection iteration bound
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_iteration_bound() {
    let battery = small_battery();
    for (idx, (_, report)) in battery.solves.iter().enumerate() {
        assert!(
            report.iterations <= report.iteration_bound(),
            "instance {idx}: {} iterations exceed bound {}",
            report.iterations,
            report.iteration_bound()
        );
    }
    let water = water_artifacts();
    for report in [&water.coarse, &water.fine] {
        assert!(
            report.iterations <= report.iteration_bound(),
            "water solve: {} iterations exceed bound {}",
            report.iterations,
            report.iteration_bound()
        );
    }
    println!(
        "acceptance criterion 2 (iteration bound): PASS — all 22 solves within ⌈log₂(v̄₀/ε)⌉ + 1 (water: {}/{} and {}/{})",
        water.coarse.iterations,
        water.coarse.iteration_bound(),
        water.fine.iterations,
        water.fine.iteration_bound()
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: monotonicity and γ-Lipschitz continuity of the scalar map
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_monotonicity_battery() {
    let start = Instant::now();
    let mut rng = seeded_rng(0x5EED_0003);
    for instance_idx in 0..10 {
        let instance = random_instance(&mut rng);
        let solver =
            BidsSolver::new(&instance.problem, &instance.grid, &instance.noise).unwrap();
        let scale = solver.upper_bound().max(1.0);
        for pair_idx in 0..5 {
            let a = rng.random_range(0.0..scale);
            let b = rng.random_range(0.0..scale);
            let (v1, v2) = if a <= b { (a, b) } else { (b, a) };
            let (table1, implied1) = solver.backward_pass(v1);
            let (table2, implied2) = solver.backward_pass(v2);

            for age in 0..=instance.problem.horizon_cap {
                for i in 0..instance.grid.len() {
                    assert!(
                        table1.value(i, age) <= table2.value(i, age) + 1e-12,
                        "instance {instance_idx}, pair {pair_idx}: V not monotone at ({i}, {age})"
                    );
                }
            }
            assert!(
                implied1 <= implied2 + 1e-12,
                "instance {instance_idx}, pair {pair_idx}: implied value not monotone"
            );
            assert!(
                (implied2 - implied1).abs() <= instance.problem.discount * (v2 - v1) + 1e-9,
                "instance {instance_idx}, pair {pair_idx}: Lipschitz bound violated: \
                 |{implied2} - {implied1}| > γ·({v2} - {v1})"
            );
        }
    }
    let total = start.elapsed().as_secs_f64();
    assert!(total < 10.0, "criterion 3 took {total:.1}s, cap is 10s");
    println!(
        "acceptance criterion 3 (monotonicity battery): PASS — 10 instances × 5 pairs, {total:.2}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: boundary identity, bitwise
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_boundary_identity() {
    let battery = small_battery();
    let mut cells = 0usize;
    for (idx, (instance, report)) in battery.solves.iter().enumerate() {
        let k = instance.problem.horizon_cap;
        for i in 0..instance.grid.len() {
            let recomputed = report.v_star
                + instance
                    .problem
                    .expected_reset_cost(instance.grid.point(i), k, &instance.noise);
            assert_eq!(
                report.value_table.value(i, k).to_bits(),
                recomputed.to_bits(),
                "instance {idx}: boundary row differs from v* + E[s(x_{i}, k, w)]"
            );
            cells += 1;
        }
    }
    let water = water_artifacts();
    let k = water.instance.problem.horizon_cap;
    for report in [&water.coarse, &water.fine] {
        for i in 0..water.instance.grid.len() {
            let recomputed = report.v_star
                + water.instance.problem.expected_reset_cost(
                    water.instance.grid.point(i),
                    k,
                    &water.instance.noise,
                );
            assert_eq!(
                report.value_table.value(i, k).to_bits(),
                recomputed.to_bits(),
                "water solve: boundary row differs at grid point {i}"
            );
            cells += 1;
        }
    }
    println!(
        "acceptance criterion 4 (boundary identity): PASS — {cells} cells bitwise equal to v* + E[s(x, k, w)]"
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: PRP sampler and density
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_prp_statistics() {
    let start = Instant::now();
    let params = PrpParams {
        event_rate: 40.0,
        duration_rate: 2.0,
    };
    let (mean, variance) = params.moments();

    // Moments over one million seeded draws.
    let mut rng = seeded_rng(0x5EED_0005);
    let n = 1_000_000usize;
    let samples: Vec<f64> = (0..n).map(|_| params.sample(&mut rng)).collect();
    let empirical_mean = samples.iter().sum::<f64>() / n as f64;
    let empirical_var = samples
        .iter()
        .map(|d| (d - empirical_mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    let mean_rel = (empirical_mean - mean).abs() / mean;
    let var_rel = (empirical_var - variance).abs() / variance;
    assert!(mean_rel < 0.005, "mean off by {mean_rel:.4} relative");
    assert!(var_rel < 0.02, "variance off by {var_rel:.4} relative");

    // KS test of 1e5 strictly positive samples against the quadrature CDF
    // conditioned on d > 0.
    let mut positive: Vec<f64> = samples.iter().copied().filter(|&d| d > 0.0).take(100_000).collect();
    assert_eq!(positive.len(), 100_000, "λ = 40 yields positive demand");
    positive.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let continuous_mass = 1.0 - params.atom_mass();
    let pdf = |d: f64| {
        if d <= 0.0 {
            params.event_rate * params.duration_rate * (-params.event_rate).exp()
        } else {
            params.pdf_continuous(d)
        }
    };
    let mut cdf_values = Vec::with_capacity(positive.len());
    let mut cumulative = adaptive_simpson(&pdf, 0.0, positive[0], 1e-12);
    cdf_values.push(cumulative / continuous_mass);
    for pair in positive.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a {
            // Composite Simpson on the (tiny) gap between sorted samples.
            let m = 0.5 * (a + b);
            cumulative += (b - a) / 6.0 * (pdf(a) + 4.0 * pdf(m) + pdf(b));
        }
        cdf_values.push(cumulative / continuous_mass);
    }
    let d_stat = ks_statistic(&cdf_values);
    let d_crit = ks_critical(1e-3, positive.len());
    assert!(
        d_stat <= d_crit,
        "KS statistic {d_stat:.5} exceeds critical value {d_crit:.5}"
    );

    // Series and Bessel forms of the density agree on the log-spaced grid.
    let mut series_worst: f64 = 0.0;
    for &event_rate in &[0.5, 5.0, 40.0] {
        for &duration_rate in &[0.1, 2.0, 10.0] {
            let p = PrpParams {
                event_rate,
                duration_rate,
            };
            for step in 0..=180 {
                // d from 1e-6 to 1e3, 20 points per decade.
                let d = 10f64.powf(-6.0 + step as f64 * 0.05);
                let bessel_form = p.pdf_continuous(d);
                let series_form = prp_pdf_series(event_rate, duration_rate, d);
                series_worst = series_worst.max(rel_diff(bessel_form, series_form));
            }
        }
    }
    assert!(
        series_worst <= 1e-10,
        "series and Bessel forms disagree by {series_worst:.3e} relative"
    );

    let total = start.elapsed().as_secs_f64();
    assert!(total < 60.0, "criterion 5 took {total:.1}s, cap is 60s");
    println!(
        "acceptance criterion 5 (PRP statistics): PASS — mean rel {mean_rel:.2e}, var rel {var_rel:.2e}, \
         KS {d_stat:.4} ≤ {d_crit:.4}, series agreement {series_worst:.2e}, {total:.2}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: water-problem structural reproduction
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_structural_reproduction() {
    let water = water_artifacts();
    assert!(water.coarse.v_star.is_finite());
    assert!((water.coarse.v_star - water.fine.v_star).abs() <= 0.1);

    let classification = classify_zones(&water.coarse.policy, &water.instance.grid);
    assert!(
        classification.warnings.is_empty(),
        "zone warnings: {:?}",
        classification.warnings
    );
    for age in 1..=6u32 {
        let zones = &classification.zones[age as usize];
        assert!(
            zones.len() <= 4,
            "age {age}: {} zones (more than 3 thresholds)",
            zones.len()
        );
    }
    let last = &classification.zones[6];
    assert_eq!(last.len(), 1, "age 6 must be a single flush region");
    assert_eq!(last[0].label, ZoneLabel::FlushReorderSmall);
    assert_eq!(last[0].x_low, 0.0);
    assert_eq!(last[0].x_high, water.instance.grid.upper());

    assert!(
        water.elapsed_secs < 300.0,
        "water solves took {:.1}s, cap is 300s",
        water.elapsed_secs
    );
    let zone_counts: Vec<usize> = (1..=6).map(|t| classification.zones[t].len()).collect();
    println!(
        "acceptance criterion 6 (structural reproduction): PASS — v* = {:.4} (ε=0.1) vs {:.4} (ε=0.01), \
         zones per age {:?}, solves {:.1}s",
        water.coarse.v_star, water.fine.v_star, zone_counts, water.elapsed_secs
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: Monte Carlo rollout consistency
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_rollout_consistency() {
    let start = Instant::now();
    let water = water_artifacts();
    let stats = rollout(
        &water.instance,
        &water.coarse.policy,
        10_000,
        1e-3,
        0x5EED_0007,
    );
    let dev = (stats.mean_discounted_cost - water.coarse.v_star).abs();
    let slack = (3.0 * stats.std_error).max(0.05 * water.coarse.v_star.abs());
    assert!(
        dev <= slack,
        "rollout mean {} vs v* {} (dev {dev:.4}, slack {slack:.4})",
        stats.mean_discounted_cost,
        water.coarse.v_star
    );
    let total = start.elapsed().as_secs_f64();
    assert!(total < 120.0, "criterion 7 took {total:.1}s, cap is 120s");
    println!(
        "acceptance criterion 7 (rollout consistency): PASS — Monte Carlo {:.4} ± {:.4} vs v* {:.4} (dev {:.4} ≤ {:.4}), horizon {}, {:.2}s",
        stats.mean_discounted_cost,
        stats.std_error,
        water.coarse.v_star,
        dev,
        slack,
        stats.effective_horizon,
        total
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: stability of min under ε-perturbations
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_min_perturbation_property() {
    let start = Instant::now();
    let mut rng = seeded_rng(0x5EED_0008);
    for case in 0..100_000 {
        let a = rng.random_range(-100.0..100.0);
        let b = rng.random_range(-100.0..100.0);
        let eps = rng.random_range(0.0..5.0);
        let a_pert = a + rng.random_range(-eps..=eps);
        let b_pert = b + rng.random_range(-eps..=eps);
        let diff = (a_pert.min(b_pert) - a.min(b)).abs();
        assert!(
            diff <= eps + 1e-12,
            "case {case}: |min({a_pert},{b_pert}) - min({a},{b})| = {diff} > {eps}"
        );
    }
    let total = start.elapsed().as_secs_f64();
    assert!(total < 1.0, "criterion 8 took {total:.2}s, cap is 1s");
    println!(
        "acceptance criterion 8 (min perturbation property): PASS — 100000 quadruples, {total:.3}s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: iteration growth of value iteration vs the bisection bound
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_gamma_sweep() {
    let mut rng = seeded_rng(0x5EED_0009);
    let base = random_instance(&mut rng);
    let mut vi_iterations = Vec::new();
    let mut bids_iterations = Vec::new();

    for &gamma in &[0.8, 0.95, 0.99] {
        let mut problem = base.problem.clone();
        problem.discount = gamma;

        let mdp = AugmentedMdp::new(&problem, &base.grid, &base.noise);
        let vi = mdp.solve(VI_TOL, 1_000_000).unwrap();
        vi_iterations.push(vi.iterations);

        let solver = BidsSolver::new(&problem, &base.grid, &base.noise).unwrap();
        let report = solver.solve(SMALL_EPSILON).unwrap();
        let bound = iteration_bound(report.upper_bound, report.epsilon);
        assert!(
            report.iterations <= bound,
            "γ={gamma}: {} bisection iterations exceed bound {bound}",
            report.iterations
        );
        bids_iterations.push((report.iterations, bound));
    }

    assert!(
        vi_iterations[0] < vi_iterations[1] && vi_iterations[1] < vi_iterations[2],
        "VI iterations not strictly increasing in γ: {vi_iterations:?}"
    );
    println!(
        "acceptance criterion 9 (γ sweep): PASS — VI iterations {vi_iterations:?} strictly increasing, \
         bisection iterations/bounds {bids_iterations:?}"
    );
}
