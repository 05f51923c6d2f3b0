//! Test functions for the adjoint constraints: compactly supported cubic
//! B-splines plus the constant and a few polynomials used in probes.

use serde::{Deserialize, Serialize};

/// A twice continuously differentiable function with analytic derivatives.
pub trait TestFunction {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// Cubic B-spline over five knots. Vanishes with its first two derivatives
/// outside `[knots[0], knots[4]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicBSpline {
    pub knots: [f64; 5],
}

impl CubicBSpline {
    pub fn new(knots: [f64; 5]) -> Self {
        debug_assert!(knots.windows(2).all(|w| w[0] < w[1]));
        CubicBSpline { knots }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[4])
    }
}

/// Cox–de Boor recursion for the B-spline of degree `knots.len() - 2`.
fn bspline(knots: &[f64], x: f64) -> f64 {
    let k = knots.len() - 2;
    if k == 0 {
        return if knots[0] <= x && x < knots[1] { 1.0 } else { 0.0 };
    }
    if x < knots[0] || x >= knots[k + 1] {
        return 0.0;
    }
    let left = (x - knots[0]) / (knots[k] - knots[0]) * bspline(&knots[..k + 1], x);
    let right = (knots[k + 1] - x) / (knots[k + 1] - knots[1]) * bspline(&knots[1..], x);
    left + right
}

/// `order`-th derivative through the standard degree-lowering identity.
fn bspline_derivative(knots: &[f64], x: f64, order: usize) -> f64 {
    if order == 0 {
        return bspline(knots, x);
    }
    let k = knots.len() - 2;
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let left = bspline_derivative(&knots[..k + 1], x, order - 1) / (knots[k] - knots[0]);
    let right = bspline_derivative(&knots[1..], x, order - 1) / (knots[k + 1] - knots[1]);
    kf * (left - right)
}

impl TestFunction for CubicBSpline {
    fn value(&self, x: f64) -> f64 {
        bspline(&self.knots, x)
    }

    fn d1(&self, x: f64) -> f64 {
        if x < self.knots[0] || x >= self.knots[4] {
            return 0.0;
        }
        bspline_derivative(&self.knots, x, 1)
    }

    fn d2(&self, x: f64) -> f64 {
        if x < self.knots[0] || x >= self.knots[4] {
            return 0.0;
        }
        bspline_derivative(&self.knots, x, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFunction {
    Constant,
    /// `Σ coefficients[k]·x^k`
    Polynomial { coefficients: Vec<f64> },
    CubicBSpline(CubicBSpline),
}

impl BasisFunction {
    pub fn is_constant(&self) -> bool {
        matches!(self, BasisFunction::Constant)
    }

    pub fn label(&self) -> String {
        match self {
            BasisFunction::Constant => "const".to_string(),
            BasisFunction::Polynomial { coefficients } => format!("poly{coefficients:?}"),
            BasisFunction::CubicBSpline(s) => format!("bspline[{:.6},{:.6}]", s.knots[0], s.knots[4]),
        }
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl TestFunction for BasisFunction {
    fn value(&self, x: f64) -> f64 {
        match self {
            BasisFunction::Constant => 1.0,
            BasisFunction::Polynomial { coefficients } => horner(coefficients, x),
            BasisFunction::CubicBSpline(s) => s.value(x),
        }
    }

    fn d1(&self, x: f64) -> f64 {
        match self {
            BasisFunction::Constant => 0.0,
            BasisFunction::Polynomial { coefficients } => {
                let d: Vec<f64> = coefficients.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
                horner(&d, x)
            }
            BasisFunction::CubicBSpline(s) => s.d1(x),
        }
    }

    fn d2(&self, x: f64) -> f64 {
        match self {
            BasisFunction::Constant => 0.0,
            BasisFunction::Polynomial { coefficients } => {
                let d: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(k, c)| (k * (k - 1)) as f64 * c)
                    .collect();
                horner(&d, x)
            }
            BasisFunction::CubicBSpline(s) => s.d2(x),
        }
    }
}

/// The finite family of test functions that generates the adjoint rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFamily {
    pub functions: Vec<BasisFunction>,
    pub includes_constant: bool,
}

impl BasisFamily {
    /// One cubic B-spline per run of five consecutive knots, so every element
    /// has support inside `[knots[0], knots[last]]`. The constant, when
    /// requested, is element 0.
    pub fn on_knots(knots: &[f64], include_constant: bool) -> Self {
        let mut functions = Vec::with_capacity(knots.len().saturating_sub(3));
        if include_constant {
            functions.push(BasisFunction::Constant);
        }
        functions.extend(knots.windows(5).map(|w| {
            BasisFunction::CubicBSpline(CubicBSpline::new([w[0], w[1], w[2], w[3], w[4]]))
        }));
        BasisFamily { functions, includes_constant: include_constant }
    }

    /// `n_splines` B-splines on uniform knots spanning `[x_lo, x_hi]`.
    pub fn uniform(x_lo: f64, x_hi: f64, n_splines: usize, include_constant: bool) -> Self {
        let n_knots = n_splines + 4;
        let knots = uniform_nodes(x_lo, x_hi, n_knots);
        Self::on_knots(&knots, include_constant)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn splines(&self) -> impl Iterator<Item = (usize, &BasisFunction)> {
        self.functions.iter().enumerate().filter(|(_, f)| !f.is_constant())
    }
}

/// `n` equally spaced points from `lo` to `hi`; the last point is exactly `hi`.
pub fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
                .collect()
        }
    }
}
