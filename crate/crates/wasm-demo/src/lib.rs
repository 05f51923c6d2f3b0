//! Browser bindings: each export takes plain numbers and returns a JSON
//! string for the page in `www/` to plot.

use serde::Serialize;
use singular_lp::basis::BasisFamily;
use singular_lp::discretize::{assemble_lp, build_grid, DiscountedForm, DiscretizeError};
use singular_lp::model::{finite_fuel, inventory, FiniteFuelParams, InventoryParams, ProblemSpec};
use singular_lp::policy::{marginals_and_kernels, FeedbackPolicy, MeasurePair, PolicyError};
use singular_lp::simplex::{solve, LPStatus, SimplexError};
use singular_lp::verify::{band_policy_oracle, BandPolicy, SimConfig, VerifyError};
use wasm_bindgen::prelude::*;

/// Largest grid the page may request.
pub const MAX_STATE_NODES: usize = 201;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("LP ended {0:?}")]
    Status(LPStatus),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// Inventory parameters in the order the page passes them.
#[derive(Debug, Clone, Copy)]
pub struct Costs {
    pub mu_d: f64,
    pub sigma: f64,
    pub c_b: f64,
    pub c_h: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Costs {
    fn problem(&self) -> Result<ProblemSpec, DemoError> {
        let all = [self.mu_d, self.sigma, self.c_b, self.c_h, self.k1, self.k2];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || self.mu_d == 0.0 {
            return Err(DemoError::Input("parameters must be finite and nonnegative, demand positive".into()));
        }
        Ok(inventory(&InventoryParams {
            mu_d: self.mu_d,
            sigma: self.sigma,
            c_b: self.c_b,
            c_h: self.c_h,
            k1: self.k1,
            k2: self.k2,
            ..InventoryParams::default()
        }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Action {
    pub x: f64,
    pub mass: f64,
    /// Most likely control at `x`: order size or push direction.
    pub control: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolvedPolicy {
    pub objective: f64,
    pub pivots: usize,
    pub nodes: Vec<f64>,
    /// `μ0` state marginal as a probability vector over `nodes`.
    pub density: Vec<f64>,
    pub actions: Vec<Action>,
}

fn solve_policy(problem: &ProblemSpec, n_state: usize, n_control: usize) -> Result<SolvedPolicy, DemoError> {
    if !(5..=MAX_STATE_NODES).contains(&n_state) || !(2..=101).contains(&n_control) {
        return Err(DemoError::Input(format!("grid {n_state}×{n_control} outside 5..={MAX_STATE_NODES} × 2..=101")));
    }
    let grid = build_grid(problem, n_state, n_control)?;
    let basis = BasisFamily::on_knots(&grid.state_nodes, true);
    let lp = assemble_lp(problem, &grid, &basis, DiscountedForm::Normalized)?;
    let solution = solve(&lp, 1e-9, 200_000)?;
    if solution.status != LPStatus::Optimal {
        return Err(DemoError::Status(solution.status));
    }
    let policy: FeedbackPolicy = marginals_and_kernels(&grid, &MeasurePair::from_columns(&lp, &solution.weights))?;
    let actions = policy
        .mu1_marginal
        .iter()
        .map(|m| Action { x: m.x, mass: m.mass, control: policy.eta1.row(m.node).map_or(f64::NAN, |r| r.argmax().0) })
        .collect();
    Ok(SolvedPolicy {
        objective: solution.objective,
        pivots: solution.iterations,
        density: policy.mu0_distribution(),
        nodes: policy.state_nodes,
        actions,
    })
}

/// Long-term average inventory LP on an `n_state × n_control` grid.
pub fn inventory_policy(costs: Costs, n_state: usize, n_control: usize) -> Result<SolvedPolicy, DemoError> {
    solve_policy(&costs.problem()?, n_state, n_control)
}

/// Discounted finite-fuel LP with the given fuel and discount rate.
pub fn fuel_policy(fuel: f64, alpha: f64, n_state: usize) -> Result<SolvedPolicy, DemoError> {
    if !(fuel >= 0.0 && fuel.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(DemoError::Input("fuel must be nonnegative and the discount rate positive".into()));
    }
    let problem = finite_fuel(&FiniteFuelParams { fuel, alpha, ..FiniteFuelParams::default() });
    solve_policy(&problem, n_state, 11)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub big_s: f64,
    pub cost: f64,
    pub half_width: f64,
}

/// Simulated average cost of `(s, S)` bands for `points` values of `S`
/// spread over `[big_s_from, big_s_to]`.
pub fn band_curve(
    costs: Costs,
    s: f64,
    big_s_from: f64,
    big_s_to: f64,
    points: usize,
    cycles: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>, DemoError> {
    if !(2..=200).contains(&points) || !(big_s_from < big_s_to) || cycles > 100_000 {
        return Err(DemoError::Input("need 2..=200 points on an increasing range and at most 100000 cycles".into()));
    }
    let problem = costs.problem()?;
    let cfg = SimConfig { dt: 0.01, n_paths: cycles, seed, ..SimConfig::default() };
    (0..points)
        .map(|i| big_s_from + (big_s_to - big_s_from) * i as f64 / (points - 1) as f64)
        .filter(|big_s| *big_s > s)
        .map(|big_s| {
            let e = band_policy_oracle(&problem, BandPolicy::new(s, big_s), &cfg)?;
            Ok(CurvePoint { big_s, cost: e.cost.mean, half_width: e.cost.half_width })
        })
        .collect()
}

fn to_json<T: Serialize>(r: Result<T, DemoError>) -> Result<String, String> {
    r.map_err(|e| e.to_string()).and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn solve_inventory(
    mu_d: f64,
    sigma: f64,
    c_b: f64,
    c_h: f64,
    k1: f64,
    k2: f64,
    n_state: usize,
    n_control: usize,
) -> Result<String, String> {
    to_json(inventory_policy(Costs { mu_d, sigma, c_b, c_h, k1, k2 }, n_state, n_control))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn band_cost_curve(
    mu_d: f64,
    sigma: f64,
    c_b: f64,
    c_h: f64,
    k1: f64,
    k2: f64,
    s: f64,
    big_s_from: f64,
    big_s_to: f64,
    points: usize,
    cycles: usize,
    seed: u32,
) -> Result<String, String> {
    to_json(band_curve(Costs { mu_d, sigma, c_b, c_h, k1, k2 }, s, big_s_from, big_s_to, points, cycles, seed as u64))
}

#[wasm_bindgen]
pub fn finite_fuel_policy(fuel: f64, alpha: f64, n_state: usize) -> Result<String, String> {
    to_json(fuel_policy(fuel, alpha, n_state))
}
