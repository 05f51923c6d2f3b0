//! Problem definition: truncated state and control spaces, the diffusion
//! generator `A`, the singular generator `B`, costs, budgets and criterion.

mod builtin;
mod file;
mod functions;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisFunction, TestFunction};
use crate::discretize::Grid;

pub use builtin::{finite_fuel, inventory, inventory_discounted, FiniteFuelParams, InventoryParams};
pub use file::ProblemFile;
pub use functions::ScalarFn;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("state {x} outside [{x_lo}, {x_hi}]")]
    Domain { x: f64, x_lo: f64, x_hi: f64 },
    #[error("jump from atom (x={x}, u={u}) lands at {target}, outside [{x_lo}, {x_hi}]")]
    JumpTarget { x: f64, u: f64, target: f64, x_lo: f64, x_hi: f64 },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("problem file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub x_lo: f64,
    pub x_hi: f64,
}

impl StateSpace {
    pub fn new(x_lo: f64, x_hi: f64) -> Result<Self, ModelError> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(ModelError::Invalid(format!("state space needs x_lo < x_hi, got [{x_lo}, {x_hi}]")));
        }
        Ok(StateSpace { x_lo, x_hi })
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// Membership with a rounding allowance of `1e-12` times the width, so
    /// grid arithmetic like `x + u` landing one ulp past `x_hi` still counts.
    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.width();
        x >= self.x_lo - slack && x <= self.x_hi + slack
    }

    fn check(&self, x: f64) -> Result<(), ModelError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(ModelError::Domain { x, x_lo: self.x_lo, x_hi: self.x_hi })
        }
    }
}

/// The closed set of admissible state-control pairs.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Admissible {
    All,
    /// `lower(x) ≤ u ≤ upper(x)`
    Band { lower: ScalarFn, upper: ScalarFn },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64, f64) -> bool + Send + Sync>),
}

impl Admissible {
    pub fn allows(&self, x: f64, u: f64) -> bool {
        match self {
            Admissible::All => true,
            Admissible::Band { lower, upper } => lower.eval(x, u) <= u && u <= upper.eval(x, u),
            Admissible::Custom(f) => f(x, u),
        }
    }
}

impl std::fmt::Debug for Admissible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Admissible::All => f.write_str("All"),
            Admissible::Band { lower, upper } => write!(f, "Band({lower:?}, {upper:?})"),
            Admissible::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSpace {
    pub u_lo: f64,
    pub u_hi: f64,
    pub admissible: Admissible,
}

impl ControlSpace {
    pub fn new(u_lo: f64, u_hi: f64, admissible: Admissible) -> Result<Self, ModelError> {
        if !(u_lo <= u_hi) {
            return Err(ModelError::Invalid(format!("control space needs u_lo ≤ u_hi, got [{u_lo}, {u_hi}]")));
        }
        Ok(ControlSpace { u_lo, u_hi, admissible })
    }
}

/// One-dimensional Itô diffusion: `Af = (σ²/2)·f'' + b·f'`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorA {
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorB {
    /// `Bf(x,u) = f(x + d(x,u)) − f(x)`
    Jump { displacement: ScalarFn },
    /// `Bf(x,u) = γ(x,u)·f'(x)`
    Gradient { direction: ScalarFn },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default)]
    pub name: String,
    /// Running rate charged against `μ0`.
    pub g: ScalarFn,
    /// Per-unit charge against `μ1`.
    pub h: ScalarFn,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSpec {
    pub c0: ScalarFn,
    pub c1: ScalarFn,
    #[serde(default)]
    pub budgets: Vec<Budget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    LongTermAverage,
    /// `nu0` lists `(x, probability)` atoms of the initial distribution.
    Discounted { alpha: f64, nu0: Vec<(f64, f64)> },
}

impl Criterion {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Criterion::LongTermAverage => None,
            Criterion::Discounted { alpha, .. } => Some(*alpha),
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if let Criterion::Discounted { alpha, nu0 } = self {
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(ModelError::Invalid(format!("discount rate must be positive, got {alpha}")));
            }
            if nu0.iter().any(|(_, p)| !(*p >= 0.0)) {
                return Err(ModelError::Invalid("nu0 has a negative weight".into()));
            }
            let mass: f64 = nu0.iter().map(|(_, p)| p).sum();
            if (mass - 1.0).abs() > 1e-12 {
                return Err(ModelError::Invalid(format!("nu0 must sum to 1, sums to {mass}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub state: StateSpace,
    pub control: ControlSpace,
    pub gen_a: GeneratorA,
    pub gen_b: GeneratorB,
    pub costs: CostSpec,
    pub criterion: Criterion,
}

impl ProblemSpec {
    /// Checks every component invariant that can be checked without a grid.
    pub fn check(&self) -> Result<(), ModelError> {
        StateSpace::new(self.state.x_lo, self.state.x_hi)?;
        ControlSpace::new(self.control.u_lo, self.control.u_hi, self.control.admissible.clone())?;
        self.criterion.check()?;
        let mut fns = vec![
            ("drift", &self.gen_a.drift),
            ("diffusion", &self.gen_a.diffusion),
            ("c0", &self.costs.c0),
            ("c1", &self.costs.c1),
        ];
        match &self.gen_b {
            GeneratorB::Jump { displacement } => fns.push(("displacement", displacement)),
            GeneratorB::Gradient { direction } => fns.push(("direction", direction)),
        }
        for b in &self.costs.budgets {
            fns.push(("budget g", &b.g));
            fns.push(("budget h", &b.h));
            if !(b.bound > 0.0) || !b.bound.is_finite() {
                return Err(ModelError::Invalid(format!("budget bound must be in (0, ∞), got {}", b.bound)));
            }
        }
        for (name, f) in fns {
            f.check().map_err(|e| ModelError::Invalid(format!("{name}: {e}")))?;
        }
        if let Criterion::Discounted { nu0, .. } = &self.criterion {
            if let Some((x, _)) = nu0.iter().find(|(x, _)| !self.state.contains(*x)) {
                return Err(ModelError::Invalid(format!("nu0 atom {x} outside the state space")));
            }
        }
        Ok(())
    }

    pub fn eval_af(&self, f: &impl TestFunction, x: f64, u: f64) -> Result<f64, ModelError> {
        eval_af(&self.gen_a, &self.state, f, x, u)
    }

    pub fn eval_bf(&self, f: &impl TestFunction, x: f64, u: f64) -> Result<f64, ModelError> {
        eval_bf(&self.gen_b, &self.state, f, x, u)
    }
}

/// `(σ(x,u)²/2)·f''(x) + b(x,u)·f'(x)` with the analytic derivatives of `f`.
pub fn eval_af(
    gen: &GeneratorA,
    state: &StateSpace,
    f: &impl TestFunction,
    x: f64,
    u: f64,
) -> Result<f64, ModelError> {
    state.check(x)?;
    let sigma = gen.diffusion.eval(x, u);
    let b = gen.drift.eval(x, u);
    let second = 0.5 * sigma * sigma * f.d2(x);
    let first = b * f.d1(x);
    Ok(second + first)
}

pub fn eval_bf(
    gen: &GeneratorB,
    state: &StateSpace,
    f: &impl TestFunction,
    x: f64,
    u: f64,
) -> Result<f64, ModelError> {
    state.check(x)?;
    match gen {
        GeneratorB::Jump { displacement } => {
            let target = x + displacement.eval(x, u);
            if !state.contains(target) {
                return Err(ModelError::JumpTarget { x, u, target, x_lo: state.x_lo, x_hi: state.x_hi });
            }
            Ok(f.value(target) - f.value(x))
        }
        GeneratorB::Gradient { direction } => Ok(direction.eval(x, u) * f.d1(x)),
    }
}

/// Grid-level check of the standing conditions on generators and costs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Minimum of `c1` over the `μ1` atoms.
    pub min_c1: Option<f64>,
    /// Minimum of each budget's `h` over the `μ1` atoms.
    pub min_h: Vec<Option<f64>>,
    /// Some singular charge (`c1` or an `h_i`) is bounded away from zero.
    pub singular_cost_bounded_away: bool,
    pub nonnegative: bool,
    /// Human-readable descriptions of negative cost or budget values.
    pub negative_values: Vec<String>,
    /// `A1 = 0` and `B1 = 0` on every atom.
    pub constant_annihilated: bool,
    pub generators_finite: bool,
    pub domain_errors: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.singular_cost_bounded_away
            && self.nonnegative
            && self.constant_annihilated
            && self.generators_finite
            && self.domain_errors.is_empty()
    }
}

pub fn validate_conditions(problem: &ProblemSpec, grid: &Grid, probes: &[BasisFunction]) -> ValidationReport {
    let costs = &problem.costs;
    let min_over = |f: &ScalarFn| {
        grid.mu1_atoms
            .iter()
            .map(|a| f.eval(a.x, a.u))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    };
    let min_c1 = min_over(&costs.c1);
    let min_h: Vec<Option<f64>> = costs.budgets.iter().map(|b| min_over(&b.h)).collect();
    let bounded_away = |m: &Option<f64>| m.is_some_and(|v| v > 0.0);
    // With no singular atoms at all there is nothing for μ1 to charge.
    let singular_cost_bounded_away =
        grid.mu1_atoms.is_empty() || bounded_away(&min_c1) || min_h.iter().any(bounded_away);

    let mut negative_values = Vec::new();
    let mut check_sign = |label: &str, f: &ScalarFn, atoms: &[crate::discretize::Atom]| {
        if let Some(a) = atoms.iter().find(|a| f.eval(a.x, a.u) < 0.0) {
            negative_values.push(format!("{label} = {} at (x={}, u={})", f.eval(a.x, a.u), a.x, a.u));
        }
    };
    check_sign("c0", &costs.c0, &grid.mu0_atoms);
    check_sign("c1", &costs.c1, &grid.mu1_atoms);
    for (i, b) in costs.budgets.iter().enumerate() {
        check_sign(&format!("g[{i}]"), &b.g, &grid.mu0_atoms);
        check_sign(&format!("h[{i}]"), &b.h, &grid.mu1_atoms);
    }

    let one = BasisFunction::Constant;
    let mut constant_annihilated = true;
    let mut generators_finite = true;
    let mut domain_errors = Vec::new();
    for a in &grid.mu0_atoms {
        match problem.eval_af(&one, a.x, a.u) {
            Ok(v) => constant_annihilated &= v == 0.0,
            Err(e) => domain_errors.push(e.to_string()),
        }
        for f in probes {
            match problem.eval_af(f, a.x, a.u) {
                Ok(v) => generators_finite &= v.is_finite(),
                Err(e) => domain_errors.push(e.to_string()),
            }
        }
    }
    for a in &grid.mu1_atoms {
        match problem.eval_bf(&one, a.x, a.u) {
            Ok(v) => constant_annihilated &= v == 0.0,
            Err(e) => domain_errors.push(e.to_string()),
        }
        for f in probes {
            match problem.eval_bf(f, a.x, a.u) {
                Ok(v) => generators_finite &= v.is_finite(),
                Err(e) => domain_errors.push(e.to_string()),
            }
        }
    }
    let nonnegative = negative_values.is_empty();
    ValidationReport {
        min_c1,
        min_h,
        singular_cost_bounded_away,
        nonnegative,
        negative_values,
        constant_annihilated,
        generators_finite,
        domain_errors,
    }
}
