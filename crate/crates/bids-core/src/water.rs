//! Local water-storage management as a reset-control problem.
//!
//! State is the tank level in liters, age is days since the tank was last
//! emptied. Each day the household orders `u` liters, demand `d` is drawn
//! from the PRP model, and the tank carries `(x + u - d)⁺` forward. Costs:
//! purchase `c·u`, shortage penalty `p` per liter of unmet demand, holding
//! (water-quality) cost `q(τ)·surplus` with `q(τ) = slope·τ`, and a flush
//! penalty `c_f·x` for emptying a tank holding `x` liters. Flushing resets
//! the age to zero and must happen at least every `k` days.

use crate::grid::StateGrid;
use crate::noise::DiscreteNoise;
use crate::problem::{ResetModel, ResetProblem};
use crate::prp::PrpParams;
use crate::table::{PolicyAction, PolicyTable};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// State-grid specification. The lower bound is pinned at zero: the tank
/// level is nonnegative and the empty tank is the reset state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Upper bound in liters. Guidance: at least twice the demand scale
    /// times the horizon cap; the default 120 L covers the default demand
    /// (mean 20 L/day, k = 6).
    pub upper_liters: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        // 0.5 L resolution over [0, 120].
        Self {
            upper_liters: 120.0,
            points: 241,
        }
    }
}

/// Demand discretization: number of equal-weight atoms and the draw seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub atoms: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            atoms: 500,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterParams {
    /// Purchase cost `c` per liter.
    pub purchase_cost: f64,
    /// Shortage penalty `p` per liter of unmet demand.
    pub shortage_penalty: f64,
    /// Flush penalty `c_f` per liter of discarded water.
    pub flush_penalty: f64,
    /// Holding-cost slope: storing a surplus liter at age `τ` costs
    /// `slope·τ` per day.
    pub holding_slope: f64,
    pub demand: PrpParams,
    /// Maximum days between flushes.
    pub horizon_cap: u32,
    pub discount: f64,
    pub grid: GridSpec,
    pub noise: NoiseSpec,
}

impl Default for WaterParams {
    fn default() -> Self {
        Self {
            purchase_cost: 0.25,
            shortage_penalty: 0.5,
            flush_penalty: 0.5,
            holding_slope: 15.0,
            demand: PrpParams {
                event_rate: 40.0,
                duration_rate: 2.0,
            },
            horizon_cap: 6,
            discount: 0.8,
            grid: GridSpec::default(),
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaterParamsError {
    #[error("{field} must be nonnegative, got {value}")]
    NegativeCost { field: &'static str, value: f64 },
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("discount must lie in [0, 1), got {0}")]
    DiscountOutOfRange(f64),
    #[error("horizon_cap must be at least 1")]
    HorizonCapZero,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("grid upper bound must be positive and finite, got {0}")]
    BadGridUpper(f64),
    #[error("noise discretization needs at least 2 atoms, got {0}")]
    TooFewAtoms(usize),
}

/// Cost evaluators for the water tank.
#[derive(Debug, Clone, Copy)]
pub struct WaterModel {
    pub purchase_cost: f64,
    pub shortage_penalty: f64,
    pub flush_penalty: f64,
    pub holding_slope: f64,
}

impl ResetModel for WaterModel {
    fn dynamics(&self, state: f64, _age: u32, control: f64, noise: f64) -> f64 {
        (state + control - noise).max(0.0)
    }

    fn stage_cost(&self, state: f64, age: u32, control: f64, noise: f64) -> f64 {
        let balance = state + control - noise;
        self.purchase_cost * control - self.shortage_penalty * balance.min(0.0)
            + self.holding_slope * age as f64 * balance.max(0.0)
    }

    fn reset_cost(&self, state: f64, _age: u32, _noise: f64) -> f64 {
        self.flush_penalty * state
    }
}

/// A fully discretized water instance ready to solve or simulate.
#[derive(Debug, Clone)]
pub struct WaterInstance {
    pub params: WaterParams,
    pub problem: ResetProblem<WaterModel>,
    pub grid: StateGrid,
    pub noise: DiscreteNoise,
}

/// Validates the parameters and assembles the reset-control instance:
/// dynamics `(ξ+u-d)⁺`, stage cost
/// `c·u - p·min(ξ+u-d, 0) + q(τ)·max(ξ+u-d, 0)`, reset cost `c_f·x`, reset
/// state 0. The control grid shares the state grid's resolution over
/// `[0, upper]`.
pub fn build_problem(params: &WaterParams) -> Result<WaterInstance, WaterParamsError> {
    validate_params(params)?;

    let grid = StateGrid::new(0.0, params.grid.upper_liters, params.grid.points)
        .expect("grid parameters validated above");
    let control_grid: Vec<f64> = grid.iter().collect();
    let noise = params.demand.discretize(params.noise.atoms, params.noise.seed);

    let model = WaterModel {
        purchase_cost: params.purchase_cost,
        shortage_penalty: params.shortage_penalty,
        flush_penalty: params.flush_penalty,
        holding_slope: params.holding_slope,
    };
    let problem = ResetProblem {
        reset_state: 0.0,
        horizon_cap: params.horizon_cap,
        discount: params.discount,
        control_grid,
        model,
    };
    Ok(WaterInstance {
        params: *params,
        problem,
        grid,
        noise,
    })
}

fn validate_params(params: &WaterParams) -> Result<(), WaterParamsError> {
    let costs = [
        ("purchase_cost", params.purchase_cost),
        ("shortage_penalty", params.shortage_penalty),
        ("flush_penalty", params.flush_penalty),
    ];
    for (field, value) in costs {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(WaterParamsError::NegativeCost { field, value });
        }
    }
    if !(params.holding_slope > 0.0) || !params.holding_slope.is_finite() {
        return Err(WaterParamsError::NonPositive {
            field: "holding_slope",
            value: params.holding_slope,
        });
    }
    if !params.demand.is_valid() {
        let (field, value) = if params.demand.event_rate > 0.0 {
            ("demand.duration_rate", params.demand.duration_rate)
        } else {
            ("demand.event_rate", params.demand.event_rate)
        };
        return Err(WaterParamsError::NonPositive { field, value });
    }
    if !(0.0..1.0).contains(&params.discount) {
        return Err(WaterParamsError::DiscountOutOfRange(params.discount));
    }
    if params.horizon_cap == 0 {
        return Err(WaterParamsError::HorizonCapZero);
    }
    if params.grid.points < 2 {
        return Err(WaterParamsError::GridTooSmall(params.grid.points));
    }
    if !(params.grid.upper_liters > 0.0) || !params.grid.upper_liters.is_finite() {
        return Err(WaterParamsError::BadGridUpper(params.grid.upper_liters));
    }
    if params.noise.atoms < 2 {
        return Err(WaterParamsError::TooFewAtoms(params.noise.atoms));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Policy structure analysis
// ---------------------------------------------------------------------------

/// Action regions the optimal policy falls into along the tank-level axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZoneLabel {
    /// Little water in the tank: flushing is cheap, empty and reorder.
    FlushReorderSmall,
    /// Order up to a target level without flushing.
    OrderUpTo,
    /// Enough water for future consumption: neither flush nor order.
    DoNothing,
    /// So much water it will never be consumed: flush and reorder.
    FlushReorderLarge,
}

impl ZoneLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZoneLabel::FlushReorderSmall => "flush-and-reorder-small",
            ZoneLabel::OrderUpTo => "order-up-to",
            ZoneLabel::DoNothing => "do-nothing",
            ZoneLabel::FlushReorderLarge => "flush-and-reorder-large",
        }
    }
}

impl std::fmt::Display for ZoneLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub label: ZoneLabel,
    pub x_low: f64,
    pub x_high: f64,
}

/// Per-age zone partition of the tank-level axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneClassification {
    /// `zones[t]` lists the zones at age `t` in increasing tank level.
    pub zones: Vec<Vec<Zone>>,
    /// Ages whose partition has more than four zones. More than three
    /// thresholds is an empirical anomaly, not an error.
    pub warnings: Vec<String>,
}

impl ZoneClassification {
    /// Threshold tank levels (zone boundaries) at age `t`.
    pub fn thresholds(&self, age: u32) -> Vec<f64> {
        self.zones[age as usize]
            .windows(2)
            .map(|pair| pair[1].x_low)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ActionCategory {
    Flush,
    Order,
    Nothing,
}

fn categorize(action: PolicyAction) -> ActionCategory {
    if action.reset {
        ActionCategory::Flush
    } else if action.control > 0.0 {
        ActionCategory::Order
    } else {
        ActionCategory::Nothing
    }
}

/// Merges consecutive grid points with the same action category into
/// zones and labels them. Flush zones containing the empty-tank end are
/// "small", any other flush zone is "large".
pub fn classify_zones(policy: &PolicyTable, grid: &StateGrid) -> ZoneClassification {
    let k = policy.horizon_cap();
    let n = policy.grid_len();
    let mut zones = Vec::with_capacity(k as usize + 1);
    let mut warnings = Vec::new();

    for age in 0..=k {
        let mut runs: Vec<(ActionCategory, usize, usize)> = Vec::new();
        for i in 0..n {
            let category = categorize(policy.action(i, age));
            match runs.last_mut() {
                Some((c, _, last)) if *c == category => *last = i,
                _ => runs.push((category, i, i)),
            }
        }
        let age_zones: Vec<Zone> = runs
            .iter()
            .map(|&(category, first, last)| Zone {
                label: match category {
                    ActionCategory::Flush if first == 0 => ZoneLabel::FlushReorderSmall,
                    ActionCategory::Flush => ZoneLabel::FlushReorderLarge,
                    ActionCategory::Order => ZoneLabel::OrderUpTo,
                    ActionCategory::Nothing => ZoneLabel::DoNothing,
                },
                x_low: grid.point(first),
                x_high: grid.point(last),
            })
            .collect();
        if age_zones.len() > 4 {
            warnings.push(format!(
                "age t={age}: policy splits into {} zones (more than 4)",
                age_zones.len()
            ));
        }
        zones.push(age_zones);
    }

    ZoneClassification { zones, warnings }
}

// ---------------------------------------------------------------------------
// Pamphlet export
// ---------------------------------------------------------------------------

pub const POLICY_CSV_HEADER: &str = "t,x_low_L,x_high_L,flush,order_L";

/// One exported lookup-table row: for tank levels in
/// `[x_low_L, x_high_L]` at age `t`, flush (or not) and order `order_L`
/// liters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub t: u32,
    pub x_low_l: f64,
    pub x_high_l: f64,
    pub flush: bool,
    pub order_l: f64,
}

impl PolicyRow {
    pub fn action_text(&self) -> String {
        match (self.flush, self.order_l > 0.0) {
            (true, true) => format!("empty tank, then order {} L", self.order_l),
            (true, false) => "empty tank".to_string(),
            (false, true) => format!("order {} L", self.order_l),
            (false, false) => "do nothing".to_string(),
        }
    }
}

/// Rows of the pamphlet table: consecutive grid points with the identical
/// action merge into one interval, so parsing the table back reproduces
/// the policy exactly.
pub fn policy_rows(policy: &PolicyTable, grid: &StateGrid) -> Vec<PolicyRow> {
    let mut rows = Vec::new();
    for age in 0..=policy.horizon_cap() {
        let mut runs: Vec<(PolicyAction, usize, usize)> = Vec::new();
        for i in 0..policy.grid_len() {
            let action = policy.action(i, age);
            match runs.last_mut() {
                Some((a, _, last)) if *a == action => *last = i,
                _ => runs.push((action, i, i)),
            }
        }
        for (action, first, last) in runs {
            rows.push(PolicyRow {
                t: age,
                x_low_l: grid.point(first),
                x_high_l: grid.point(last),
                flush: action.reset,
                order_l: action.control,
            });
        }
    }
    rows
}

pub fn write_policy_csv(
    policy: &PolicyTable,
    grid: &StateGrid,
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{POLICY_CSV_HEADER}")?;
    for row in policy_rows(policy, grid) {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.t,
            row.x_low_l,
            row.x_high_l,
            u8::from(row.flush),
            row.order_l
        )?;
    }
    Ok(())
}

/// JSON mirror of the pamphlet with a parameter echo block and
/// human-readable action text per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyExport {
    pub params: WaterParams,
    pub rows: Vec<ExportedRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportedRow {
    pub t: u32,
    pub x_low_l: f64,
    pub x_high_l: f64,
    pub flush: bool,
    pub order_l: f64,
    pub action: String,
}

pub fn policy_export(policy: &PolicyTable, grid: &StateGrid, params: &WaterParams) -> PolicyExport {
    PolicyExport {
        params: *params,
        rows: policy_rows(policy, grid)
            .into_iter()
            .map(|row| ExportedRow {
                t: row.t,
                x_low_l: row.x_low_l,
                x_high_l: row.x_high_l,
                flush: row.flush,
                order_l: row.order_l,
                action: row.action_text(),
            })
            .collect(),
    }
}

#[derive(Debug, Error)]
pub enum PolicyParseError {
    #[error("row {row}: expected {POLICY_CSV_HEADER:?} fields, got {found} columns")]
    WrongColumnCount { row: usize, found: usize },
    #[error("row {row}: could not parse {field}: {message}")]
    BadField {
        row: usize,
        field: &'static str,
        message: String,
    },
    #[error("header mismatch: expected {POLICY_CSV_HEADER:?}, got {0:?}")]
    BadHeader(String),
    #[error("missing header row")]
    MissingHeader,
    #[error("row {row}: interval [{x_low}, {x_high}] does not align with the grid")]
    Misaligned { row: usize, x_low: f64, x_high: f64 },
    #[error("row {row}: age t={age} exceeds horizon cap {horizon_cap}")]
    AgeOutOfRange { row: usize, age: u32, horizon_cap: u32 },
    #[error("row {row}: overlaps an earlier row at t={age}, x={x} L")]
    Overlap { row: usize, age: u32, x: f64 },
    #[error("no rows for age t={age}")]
    MissingAge { age: u32 },
    #[error("age t={age}: grid point x={x} L is not covered by any row")]
    Gap { age: u32, x: f64 },
    #[error("age t={age}, x={x} L: flush must be 1 at the horizon cap (the tank is emptied at least every t={age} days)")]
    MissingForcedReset { age: u32, x: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a pamphlet CSV back into a per-grid-point policy, validating
/// that the rows tile every `(grid point, age)` cell exactly once.
pub fn parse_policy_csv(
    input: impl BufRead,
    grid: &StateGrid,
    horizon_cap: u32,
) -> Result<PolicyTable, PolicyParseError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(PolicyParseError::MissingHeader)??;
    if header.trim() != POLICY_CSV_HEADER {
        return Err(PolicyParseError::BadHeader(header));
    }

    let n = grid.len();
    let mut actions: Vec<Vec<Option<PolicyAction>>> =
        vec![vec![None; n]; horizon_cap as usize + 1];

    for (line_index, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line_index + 2; // 1-based, after the header
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(PolicyParseError::WrongColumnCount {
                row,
                found: fields.len(),
            });
        }
        let t: u32 = parse_field(fields[0], row, "t")?;
        let x_low: f64 = parse_field(fields[1], row, "x_low_L")?;
        let x_high: f64 = parse_field(fields[2], row, "x_high_L")?;
        let flush_raw: u8 = parse_field(fields[3], row, "flush")?;
        let order: f64 = parse_field(fields[4], row, "order_L")?;

        if t > horizon_cap {
            return Err(PolicyParseError::AgeOutOfRange {
                row,
                age: t,
                horizon_cap,
            });
        }
        let i_low = grid.nearest_index(x_low);
        let i_high = grid.nearest_index(x_high);
        let align_tol = 1e-9 * (1.0 + grid.spacing());
        if (grid.point(i_low) - x_low).abs() > align_tol
            || (grid.point(i_high) - x_high).abs() > align_tol
            || i_high < i_low
        {
            return Err(PolicyParseError::Misaligned { row, x_low, x_high });
        }
        let action = PolicyAction {
            reset: flush_raw != 0,
            control: order,
        };
        for i in i_low..=i_high {
            if actions[t as usize][i].is_some() {
                return Err(PolicyParseError::Overlap {
                    row,
                    age: t,
                    x: grid.point(i),
                });
            }
            actions[t as usize][i] = Some(action);
        }
    }

    let mut table = Vec::with_capacity(horizon_cap as usize + 1);
    for (age, row) in actions.into_iter().enumerate() {
        let age = age as u32;
        if row.iter().all(Option::is_none) {
            return Err(PolicyParseError::MissingAge { age });
        }
        let mut complete = Vec::with_capacity(n);
        for (i, cell) in row.into_iter().enumerate() {
            match cell {
                Some(action) => {
                    if age == horizon_cap && !action.reset {
                        return Err(PolicyParseError::MissingForcedReset {
                            age,
                            x: grid.point(i),
                        });
                    }
                    complete.push(action);
                }
                None => {
                    return Err(PolicyParseError::Gap {
                        age,
                        x: grid.point(i),
                    })
                }
            }
        }
        table.push(complete);
    }
    Ok(PolicyTable::new(table))
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    row: usize,
    field: &'static str,
) -> Result<T, PolicyParseError>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e: T::Err| PolicyParseError::BadField {
            row,
            field,
            message: e.to_string(),
        })
}
