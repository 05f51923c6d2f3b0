//! The two built-in problems: inventory control of a drifted Brownian motion
//! with fixed plus proportional ordering costs, and the finite-fuel follower.

use serde::{Deserialize, Serialize};

use super::{
    Admissible, Budget, ControlSpace, CostSpec, Criterion, GeneratorA, GeneratorB, ProblemSpec, ScalarFn,
    StateSpace,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryParams {
    /// Demand rate; the inventory drifts at `-mu_d`.
    pub mu_d: f64,
    pub sigma: f64,
    /// Back-order cost per unit per unit time.
    pub c_b: f64,
    /// Holding cost per unit per unit time.
    pub c_h: f64,
    /// Fixed cost per order.
    pub k1: f64,
    /// Cost per unit ordered.
    pub k2: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Largest order size on the grid.
    pub u_max: f64,
}

impl Default for InventoryParams {
    fn default() -> Self {
        InventoryParams {
            mu_d: 1.0,
            sigma: 1.0,
            c_b: 2.0,
            c_h: 1.0,
            k1: 1.0,
            k2: 0.5,
            x_lo: -3.0,
            x_hi: 5.0,
            u_max: 4.0,
        }
    }
}

/// Long-term average inventory problem.
pub fn inventory(p: &InventoryParams) -> ProblemSpec {
    ProblemSpec {
        name: "inventory".to_string(),
        state: StateSpace { x_lo: p.x_lo, x_hi: p.x_hi },
        control: ControlSpace { u_lo: 0.0, u_hi: p.u_max, admissible: Admissible::All },
        gen_a: GeneratorA { drift: ScalarFn::constant(-p.mu_d), diffusion: ScalarFn::constant(p.sigma) },
        gen_b: GeneratorB::Jump { displacement: ScalarFn::control() },
        costs: CostSpec {
            c0: ScalarFn::PiecewiseLinear { points: vec![[-1.0, p.c_b], [0.0, 0.0], [1.0, p.c_h]], u: 0.0 },
            c1: ScalarFn::linear(p.k1, 0.0, p.k2),
            budgets: Vec::new(),
        },
        criterion: Criterion::LongTermAverage,
    }
}

/// Discounted inventory problem started from the point mass at `x0`.
pub fn inventory_discounted(p: &InventoryParams, alpha: f64, x0: f64) -> ProblemSpec {
    ProblemSpec {
        name: "inventory-discounted".to_string(),
        criterion: Criterion::Discounted { alpha, nu0: vec![(x0, 1.0)] },
        ..inventory(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteFuelParams {
    pub alpha: f64,
    /// Fuel available, charged one unit per unit of push.
    pub fuel: f64,
    pub x0: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Default for FiniteFuelParams {
    fn default() -> Self {
        FiniteFuelParams { alpha: 1.0, fuel: 1.0, x0: 1.0, x_lo: -4.0, x_hi: 4.0 }
    }
}

/// `X = x0 + W − ξ` with quadratic running cost, discounted at `alpha`.
/// The control is the push direction `u ∈ [−1, 1]`; the fuel limit enters as
/// a budget row on `μ1`.
pub fn finite_fuel(p: &FiniteFuelParams) -> ProblemSpec {
    ProblemSpec {
        name: "finite-fuel".to_string(),
        state: StateSpace { x_lo: p.x_lo, x_hi: p.x_hi },
        control: ControlSpace { u_lo: -1.0, u_hi: 1.0, admissible: Admissible::All },
        gen_a: GeneratorA { drift: ScalarFn::constant(0.0), diffusion: ScalarFn::constant(1.0) },
        gen_b: GeneratorB::Gradient { direction: ScalarFn::control() },
        costs: CostSpec {
            c0: ScalarFn::Quadratic { a: 0.0, x: 0.0, xx: 1.0, u: 0.0, uu: 0.0, xu: 0.0 },
            c1: ScalarFn::constant(0.0),
            budgets: vec![Budget {
                name: "fuel".to_string(),
                g: ScalarFn::constant(0.0),
                h: ScalarFn::constant(1.0),
                bound: p.fuel,
            }],
        },
        criterion: Criterion::Discounted { alpha: p.alpha, nu0: vec![(p.x0, 1.0)] },
    }
}
