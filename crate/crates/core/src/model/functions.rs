//! The fixed catalog of scalar functions of `(x, u)` used for drift, diffusion,
//! costs, budgets, jump sizes and push directions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A real-valued function of a state `x` and a control `u`.
///
/// The catalog variants serialize to the problem-file format; `Custom` exists
/// for programmatic use only and refuses to serialize.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// `a + x·X + u·U`
    Linear {
        #[serde(default)]
        a: f64,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        u: f64,
    },
    /// Linear interpolation in `x` through `points` (sorted by `x`), extended
    /// linearly beyond the end points, plus `u·U`.
    PiecewiseLinear {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        u: f64,
    },
    /// `a + x·X + xx·X² + u·U + uu·U² + xu·X·U`
    Quadratic {
        #[serde(default)]
        a: f64,
        #[serde(default)]
        x: f64,
        #[serde(default)]
        xx: f64,
        #[serde(default)]
        u: f64,
        #[serde(default)]
        uu: f64,
        #[serde(default)]
        xu: f64,
    },
    /// Values on the uniform grid `x0 + i·dx`, linearly interpolated in `x` and
    /// held constant outside the table. Independent of `u`.
    Tabulated { x0: f64, dx: f64, values: Vec<f64> },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn linear(a: f64, x: f64, u: f64) -> Self {
        ScalarFn::Linear { a, x, u }
    }

    /// The identity in the control, `(x, u) ↦ u`.
    pub fn control() -> Self {
        ScalarFn::linear(0.0, 0.0, 1.0)
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Linear { a, x: bx, u: bu } => a + bx * x + bu * u,
            ScalarFn::PiecewiseLinear { points, u: bu } => interpolate(points, x) + bu * u,
            ScalarFn::Quadratic { a, x: bx, xx, u: bu, uu, xu } => {
                a + bx * x + xx * x * x + bu * u + uu * u * u + xu * x * u
            }
            ScalarFn::Tabulated { x0, dx, values } => tabulated(*x0, *dx, values, x),
            ScalarFn::Custom(f) => f(x, u),
        }
    }

    /// The value of the function when the catalog entry is structurally
    /// constant in both arguments.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            ScalarFn::Constant { value } => Some(*value),
            ScalarFn::Linear { a, x, u } if *x == 0.0 && *u == 0.0 => Some(*a),
            ScalarFn::Quadratic { a, x, xx, u, uu, xu }
                if [*x, *xx, *u, *uu, *xu].iter().all(|c| *c == 0.0) =>
            {
                Some(*a)
            }
            _ => None,
        }
    }

    /// Checks the catalog parameters (sorted knots, positive spacing, finite
    /// coefficients).
    pub fn check(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            ScalarFn::Constant { value } if !value.is_finite() => Err("non-finite constant".into()),
            ScalarFn::Linear { a, x, u } if !finite(&[*a, *x, *u]) => {
                Err("non-finite linear coefficient".into())
            }
            ScalarFn::Quadratic { a, x, xx, u, uu, xu } if !finite(&[*a, *x, *xx, *u, *uu, *xu]) => {
                Err("non-finite quadratic coefficient".into())
            }
            ScalarFn::PiecewiseLinear { points, u } => {
                if points.is_empty() {
                    return Err("piecewise_linear needs at least one point".into());
                }
                if !u.is_finite() || points.iter().any(|p| !finite(p)) {
                    return Err("non-finite piecewise_linear point".into());
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err("piecewise_linear points must be strictly increasing in x".into());
                }
                Ok(())
            }
            ScalarFn::Tabulated { x0, dx, values } => {
                if values.is_empty() || !(*dx > 0.0) || !x0.is_finite() || !finite(values) {
                    return Err("tabulated needs dx > 0 and finite values".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn interpolate(points: &[[f64; 2]], x: f64) -> f64 {
    match points.len() {
        0 => 0.0,
        1 => points[0][1],
        n => {
            // Segment index, with the end segments extended.
            let k = match points.iter().position(|p| p[0] > x) {
                Some(0) => 0,
                Some(i) => i - 1,
                None => n - 2,
            }
            .min(n - 2);
            let [x0, y0] = points[k];
            let [x1, y1] = points[k + 1];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

fn tabulated(x0: f64, dx: f64, values: &[f64], x: f64) -> f64 {
    let last = values.len() - 1;
    let pos = (x - x0) / dx;
    if pos <= 0.0 {
        return values[0];
    }
    if pos >= last as f64 {
        return values[last];
    }
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    values[i] * (1.0 - t) + values[i + 1] * t
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Constant { value } => write!(f, "Constant({value})"),
            ScalarFn::Linear { a, x, u } => write!(f, "Linear({a} + {x}·x + {u}·u)"),
            ScalarFn::PiecewiseLinear { points, u } => {
                write!(f, "PiecewiseLinear({points:?}, u: {u})")
            }
            ScalarFn::Quadratic { a, x, xx, u, uu, xu } => {
                write!(f, "Quadratic({a}, {x}, {xx}, {u}, {uu}, {xu})")
            }
            ScalarFn::Tabulated { x0, dx, values } => {
                write!(f, "Tabulated(x0: {x0}, dx: {dx}, n: {})", values.len())
            }
            ScalarFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}
