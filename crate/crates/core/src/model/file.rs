//! Flat key/value problem files (TOML syntax).
//!
//! ```toml
//! name = "inventory"
//! x_lo = -3.0
//! x_hi = 5.0
//! u_lo = 0.0
//! u_hi = 4.0
//! drift = { kind = "constant", value = -1.0 }
//! diffusion = { kind = "constant", value = 1.0 }
//! singular = "jump"
//! singular_fn = { kind = "linear", u = 1.0 }
//! c0 = { kind = "piecewise_linear", points = [[-1.0, 2.0], [0.0, 0.0], [1.0, 1.0]] }
//! c1 = { kind = "linear", a = 1.0, u = 0.5 }
//! criterion = "long_term_average"
//! ```
//!
//! Discounted problems add `alpha` and `nu0 = [[x, p], ...]`; budgets are
//! `[[budget]]` tables with `g`, `h` and `bound`.

use serde::{Deserialize, Serialize};

use super::{
    Admissible, Budget, ControlSpace, CostSpec, Criterion, GeneratorA, GeneratorB, ModelError, ProblemSpec,
    ScalarFn, StateSpace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    Jump,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    LongTermAverage,
    Discounted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    pub x_lo: f64,
    pub x_hi: f64,
    pub u_lo: f64,
    pub u_hi: f64,
    #[serde(default = "all_admissible")]
    pub admissible: Admissible,
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub singular: SingularKind,
    /// Jump displacement or push direction, depending on `singular`.
    pub singular_fn: ScalarFn,
    pub c0: ScalarFn,
    pub c1: ScalarFn,
    pub criterion: CriterionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nu0: Vec<[f64; 2]>,
    #[serde(default, rename = "budget", skip_serializing_if = "Vec::is_empty")]
    pub budgets: Vec<Budget>,
}

fn all_admissible() -> Admissible {
    Admissible::All
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemSpec, ModelError> {
        let file: ProblemFile = toml::from_str(text).map_err(|e| ModelError::Parse(e.message().to_string()))?;
        file.into_spec()
    }

    pub fn into_spec(self) -> Result<ProblemSpec, ModelError> {
        let criterion = match self.criterion {
            CriterionKind::LongTermAverage => Criterion::LongTermAverage,
            CriterionKind::Discounted => Criterion::Discounted {
                alpha: self
                    .alpha
                    .ok_or_else(|| ModelError::Parse("discounted criterion needs `alpha`".into()))?,
                nu0: self.nu0.iter().map(|[x, p]| (*x, *p)).collect(),
            },
        };
        let gen_b = match self.singular {
            SingularKind::Jump => GeneratorB::Jump { displacement: self.singular_fn },
            SingularKind::Gradient => GeneratorB::Gradient { direction: self.singular_fn },
        };
        let spec = ProblemSpec {
            name: self.name,
            state: StateSpace::new(self.x_lo, self.x_hi)?,
            control: ControlSpace::new(self.u_lo, self.u_hi, self.admissible)?,
            gen_a: GeneratorA { drift: self.drift, diffusion: self.diffusion },
            gen_b,
            costs: CostSpec { c0: self.c0, c1: self.c1, budgets: self.budgets },
            criterion,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let (singular, singular_fn) = match &spec.gen_b {
            GeneratorB::Jump { displacement } => (SingularKind::Jump, displacement.clone()),
            GeneratorB::Gradient { direction } => (SingularKind::Gradient, direction.clone()),
        };
        let (criterion, alpha, nu0) = match &spec.criterion {
            Criterion::LongTermAverage => (CriterionKind::LongTermAverage, None, Vec::new()),
            Criterion::Discounted { alpha, nu0 } => {
                (CriterionKind::Discounted, Some(*alpha), nu0.iter().map(|(x, p)| [*x, *p]).collect())
            }
        };
        ProblemFile {
            name: spec.name.clone(),
            x_lo: spec.state.x_lo,
            x_hi: spec.state.x_hi,
            u_lo: spec.control.u_lo,
            u_hi: spec.control.u_hi,
            admissible: spec.control.admissible.clone(),
            drift: spec.gen_a.drift.clone(),
            diffusion: spec.gen_a.diffusion.clone(),
            singular,
            singular_fn,
            c0: spec.costs.c0.clone(),
            c1: spec.costs.c1.clone(),
            criterion,
            alpha,
            nu0,
            budgets: spec.costs.budgets.clone(),
        }
    }

    /// Canonical text of a problem. Fails for problems holding `Custom`
    /// closures, which have no textual form.
    pub fn render(spec: &ProblemSpec) -> Result<String, ModelError> {
        toml::to_string(&Self::from_spec(spec)).map_err(|e| ModelError::Parse(e.to_string()))
    }
}
