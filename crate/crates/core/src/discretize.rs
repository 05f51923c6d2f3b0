//! Finite images of the measure linear programs: atom grids for `μ0` and
//! `μ1`, adjoint rows generated by a basis of test functions, the mass row,
//! budget rows and the objective.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::basis::{uniform_nodes, BasisFamily, BasisFunction, TestFunction};
use crate::model::{Criterion, GeneratorB, ModelError, ProblemSpec};
use crate::policy::MeasurePair;

#[derive(Debug, thiserror::Error)]
pub enum DiscretizeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("grid needs n_state ≥ 3 and n_control ≥ 1 (got {n_state}, {n_control})")]
    GridSize { n_state: usize, n_control: usize },
    #[error("no admissible control at state node {index} (x = {x})")]
    EmptyControlSet { index: usize, x: f64 },
    #[error("basis has {0} elements, at least 2 are required")]
    BasisTooSmall(usize),
    #[error("criterion mismatch: {0}")]
    Criterion(String),
    #[error("dimension mismatch: expected {expected} weights, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// A state-control point carrying its position on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub u: f64,
    /// Index into `Grid::state_nodes`.
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub state_nodes: Vec<f64>,
    pub control_nodes: Vec<f64>,
    pub mu0_atoms: Vec<Atom>,
    pub mu1_atoms: Vec<Atom>,
    /// Singular atoms removed because their jump leaves the state interval.
    pub dropped_jump_atoms: usize,
}

impl Grid {
    /// Grid from explicit atoms; each atom's `node` must index `state_nodes`.
    pub fn from_atoms(state_nodes: Vec<f64>, mu0_atoms: Vec<Atom>, mu1_atoms: Vec<Atom>) -> Self {
        let mut control_nodes: Vec<f64> = mu0_atoms.iter().chain(&mu1_atoms).map(|a| a.u).collect();
        control_nodes.sort_by(f64::total_cmp);
        control_nodes.dedup();
        Grid { state_nodes, control_nodes, mu0_atoms, mu1_atoms, dropped_jump_atoms: 0 }
    }

    pub fn n_columns(&self) -> usize {
        self.mu0_atoms.len() + self.mu1_atoms.len()
    }
}

/// Uniform state and control nodes; atoms are all admissible pairs, minus the
/// singular atoms whose jump target leaves the state interval.
pub fn build_grid(problem: &ProblemSpec, n_state: usize, n_control: usize) -> Result<Grid, DiscretizeError> {
    if n_state < 3 || n_control < 1 {
        return Err(DiscretizeError::GridSize { n_state, n_control });
    }
    let state_nodes = uniform_nodes(problem.state.x_lo, problem.state.x_hi, n_state);
    let control_nodes = uniform_nodes(problem.control.u_lo, problem.control.u_hi, n_control);
    let mut mu0_atoms = Vec::with_capacity(n_state * n_control);
    let mut mu1_atoms = Vec::with_capacity(n_state * n_control);
    let mut dropped = 0;
    for (node, &x) in state_nodes.iter().enumerate() {
        let before = mu0_atoms.len();
        for &u in &control_nodes {
            if !problem.control.admissible.allows(x, u) {
                continue;
            }
            let atom = Atom { x, u, node };
            mu0_atoms.push(atom);
            match &problem.gen_b {
                GeneratorB::Jump { displacement } if !problem.state.contains(x + displacement.eval(x, u)) => {
                    dropped += 1;
                }
                _ => mu1_atoms.push(atom),
            }
        }
        if mu0_atoms.len() == before {
            return Err(DiscretizeError::EmptyControlSet { index: node, x });
        }
    }
    Ok(Grid { state_nodes, control_nodes, mu0_atoms, mu1_atoms, dropped_jump_atoms: dropped })
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(cols: usize) -> Self {
        Matrix { rows: 0, cols, data: Vec::new() }
    }

    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Self {
        let mut m = Matrix::new(cols);
        for r in rows {
            m.push_row(r);
        }
        m
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), w)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowLabel {
    /// Adjoint relation for basis element `k`.
    Adjoint(usize),
    /// Adjoint relation for `f ≡ 1` in the rescaled discounted form.
    ConstantAdjoint,
    Mass,
    Budget(usize),
    /// Unlabelled equality row of a hand-built LP.
    Eq(usize),
    /// Unlabelled `≤` row of a hand-built LP.
    Le(usize),
}

impl RowLabel {
    /// Eight-character-or-shorter name used in MPS files.
    pub fn mps_name(&self) -> String {
        match self {
            RowLabel::Adjoint(k) => format!("ADJ{k:05}"),
            RowLabel::ConstantAdjoint => "ADJCONST".to_string(),
            RowLabel::Mass => "MASS".to_string(),
            RowLabel::Budget(i) => format!("BUD{i:05}"),
            RowLabel::Eq(i) => format!("EQ{i:06}"),
            RowLabel::Le(i) => format!("LE{i:06}"),
        }
    }

    pub fn from_mps_name(name: &str) -> Option<Self> {
        let num = |prefix: &str| name.strip_prefix(prefix).and_then(|d| d.parse().ok());
        match name {
            "ADJCONST" => Some(RowLabel::ConstantAdjoint),
            "MASS" => Some(RowLabel::Mass),
            _ => num("ADJ")
                .map(RowLabel::Adjoint)
                .or_else(|| num("BUD").map(RowLabel::Budget))
                .or_else(|| num("EQ").map(RowLabel::Eq))
                .or_else(|| num("LE").map(RowLabel::Le)),
        }
    }
}

/// `min objective·w  s.t.  eq·w = eq_rhs,  ineq·w ≤ ineq_rhs,  w ≥ 0`,
/// with the `w0` columns first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLP {
    pub n_mu0: usize,
    pub n_mu1: usize,
    pub objective: Vec<f64>,
    pub eq: Matrix,
    pub eq_rhs: Vec<f64>,
    pub eq_labels: Vec<RowLabel>,
    pub ineq: Matrix,
    pub ineq_rhs: Vec<f64>,
    pub ineq_labels: Vec<RowLabel>,
    /// Total `w0` mass any feasible point carries.
    pub required_mass: f64,
}

impl DiscreteLP {
    /// A plain LP over `objective.len()` nonnegative variables, all treated as
    /// `w0` columns.
    pub fn generic(objective: Vec<f64>, eq: &[Vec<f64>], eq_rhs: Vec<f64>, ineq: &[Vec<f64>], ineq_rhs: Vec<f64>) -> Self {
        let n = objective.len();
        assert_eq!(eq.len(), eq_rhs.len());
        assert_eq!(ineq.len(), ineq_rhs.len());
        DiscreteLP {
            n_mu0: n,
            n_mu1: 0,
            objective,
            eq: Matrix::from_rows(n, eq),
            eq_labels: (0..eq.len()).map(RowLabel::Eq).collect(),
            eq_rhs,
            ineq: Matrix::from_rows(n, ineq),
            ineq_labels: (0..ineq.len()).map(RowLabel::Le).collect(),
            ineq_rhs,
            required_mass: f64::NAN,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.n_mu0 + self.n_mu1
    }

    pub fn objective_value(&self, w: &[f64]) -> f64 {
        dot(&self.objective, w)
    }

    /// Objective, equality and inequality rows as three CSV documents.
    pub fn to_csv(&self) -> (String, String, String) {
        let mut objective = String::from("col,measure,cost\n");
        for (j, c) in self.objective.iter().enumerate() {
            let measure = if j < self.n_mu0 { "mu0" } else { "mu1" };
            writeln!(objective, "{j},{measure},{c:?}").unwrap();
        }
        let rows_csv = |m: &Matrix, rhs: &[f64], labels: &[RowLabel]| {
            let mut out = String::from("row,label,rhs,col,value\n");
            for i in 0..m.rows {
                for (j, v) in m.row(i).iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    writeln!(out, "{i},{},{:?},{j},{v:?}", labels[i].mps_name(), rhs[i]).unwrap();
                }
            }
            out
        };
        (
            objective,
            rows_csv(&self.eq, &self.eq_rhs, &self.eq_labels),
            rows_csv(&self.ineq, &self.ineq_rhs, &self.ineq_labels),
        )
    }
}

/// Which finite program an adjoint row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountedForm {
    /// `μ0` a probability, adjoint rows through `A^α f = Af + α(ν0 f − f)`.
    Normalized,
    /// `μ0` of mass `1/α`, adjoint rows `(A − α)f` with right side `−ν0 f`.
    Rescaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    LongTermAverage,
    Discounted(DiscountedForm),
}

/// Coefficients and right-hand side of the adjoint relation for one test
/// function, in column order `w0 ++ w1`.
pub fn adjoint_row(
    problem: &ProblemSpec,
    grid: &Grid,
    f: &BasisFunction,
    form: Formulation,
) -> Result<(Vec<f64>, f64), DiscretizeError> {
    let mut row = Vec::with_capacity(grid.n_columns());
    let rhs = match form {
        Formulation::LongTermAverage => {
            for a in &grid.mu0_atoms {
                row.push(problem.eval_af(f, a.x, a.u)?);
            }
            0.0
        }
        Formulation::Discounted(form) => {
            let (alpha, nu0) = discounted_parts(problem)?;
            let nu0_f: f64 = nu0.iter().map(|(x, p)| p * f.value(*x)).sum();
            for a in &grid.mu0_atoms {
                let af = problem.eval_af(f, a.x, a.u)?;
                row.push(match form {
                    DiscountedForm::Normalized => af + alpha * (nu0_f - f.value(a.x)),
                    DiscountedForm::Rescaled => af - alpha * f.value(a.x),
                });
            }
            match form {
                DiscountedForm::Normalized => 0.0,
                DiscountedForm::Rescaled => -nu0_f,
            }
        }
    };
    for a in &grid.mu1_atoms {
        row.push(problem.eval_bf(f, a.x, a.u)?);
    }
    Ok((row, rhs))
}

fn discounted_parts(problem: &ProblemSpec) -> Result<(f64, &[(f64, f64)]), DiscretizeError> {
    match &problem.criterion {
        Criterion::Discounted { alpha, nu0 } => {
            problem.criterion.check()?;
            Ok((*alpha, nu0))
        }
        Criterion::LongTermAverage => {
            Err(DiscretizeError::Criterion("discounted assembly needs a discounted criterion".into()))
        }
    }
}

pub fn assemble_lta_lp(problem: &ProblemSpec, grid: &Grid, basis: &BasisFamily) -> Result<DiscreteLP, DiscretizeError> {
    assemble(problem, grid, basis, Formulation::LongTermAverage)
}

pub fn assemble_discounted_lp(
    problem: &ProblemSpec,
    grid: &Grid,
    basis: &BasisFamily,
    form: DiscountedForm,
) -> Result<DiscreteLP, DiscretizeError> {
    discounted_parts(problem)?;
    assemble(problem, grid, basis, Formulation::Discounted(form))
}

/// Assembles whichever program the problem's criterion calls for.
pub fn assemble_lp(
    problem: &ProblemSpec,
    grid: &Grid,
    basis: &BasisFamily,
    form: DiscountedForm,
) -> Result<DiscreteLP, DiscretizeError> {
    match problem.criterion {
        Criterion::LongTermAverage => assemble_lta_lp(problem, grid, basis),
        Criterion::Discounted { .. } => assemble_discounted_lp(problem, grid, basis, form),
    }
}

fn assemble(
    problem: &ProblemSpec,
    grid: &Grid,
    basis: &BasisFamily,
    form: Formulation,
) -> Result<DiscreteLP, DiscretizeError> {
    if basis.len() < 2 {
        return Err(DiscretizeError::BasisTooSmall(basis.len()));
    }
    let n0 = grid.mu0_atoms.len();
    let n1 = grid.mu1_atoms.len();
    let cols = n0 + n1;
    let alpha = problem.criterion.alpha().unwrap_or(1.0);
    let (objective_scale, budget_scale, required_mass) = match form {
        Formulation::LongTermAverage => (1.0, 1.0, 1.0),
        Formulation::Discounted(DiscountedForm::Normalized) => (1.0 / alpha, alpha, 1.0),
        Formulation::Discounted(DiscountedForm::Rescaled) => (1.0, 1.0, 1.0 / alpha),
    };

    let costs = &problem.costs;
    let objective: Vec<f64> = grid
        .mu0_atoms
        .iter()
        .map(|a| costs.c0.eval(a.x, a.u) * objective_scale)
        .chain(grid.mu1_atoms.iter().map(|a| costs.c1.eval(a.x, a.u) * objective_scale))
        .collect();

    let mut eq = Matrix::new(cols);
    let mut eq_rhs = Vec::new();
    let mut eq_labels = Vec::new();
    if form == Formulation::Discounted(DiscountedForm::Rescaled) {
        let (row, rhs) = adjoint_row(problem, grid, &BasisFunction::Constant, form)?;
        eq.push_row(&row);
        eq_rhs.push(rhs);
        eq_labels.push(RowLabel::ConstantAdjoint);
    }
    for (k, f) in basis.splines() {
        let (row, rhs) = adjoint_row(problem, grid, f, form)?;
        if rhs == 0.0 && row.iter().all(|v| *v == 0.0) {
            log::debug!("adjoint row for basis element {k} vanishes on the grid; dropped");
            continue;
        }
        eq.push_row(&row);
        eq_rhs.push(rhs);
        eq_labels.push(RowLabel::Adjoint(k));
    }
    if form != Formulation::Discounted(DiscountedForm::Rescaled) {
        let mut mass = vec![0.0; cols];
        mass[..n0].iter_mut().for_each(|v| *v = 1.0);
        eq.push_row(&mass);
        eq_rhs.push(1.0);
        eq_labels.push(RowLabel::Mass);
    }

    let mut ineq = Matrix::new(cols);
    let mut ineq_rhs = Vec::new();
    let mut ineq_labels = Vec::new();
    for (i, b) in costs.budgets.iter().enumerate() {
        let row: Vec<f64> = grid
            .mu0_atoms
            .iter()
            .map(|a| b.g.eval(a.x, a.u))
            .chain(grid.mu1_atoms.iter().map(|a| b.h.eval(a.x, a.u)))
            .collect();
        ineq.push_row(&row);
        ineq_rhs.push(b.bound * budget_scale);
        ineq_labels.push(RowLabel::Budget(i));
    }

    Ok(DiscreteLP { n_mu0: n0, n_mu1: n1, objective, eq, eq_rhs, eq_labels, ineq, ineq_rhs, ineq_labels, required_mass })
}

/// Infinity norms of `eq·w − rhs` and of the positive part of `ineq·w − rhs`.
pub fn constraint_residual(lp: &DiscreteLP, weights: &MeasurePair) -> Result<(f64, f64), DiscretizeError> {
    if weights.w0.len() != lp.n_mu0 || weights.w1.len() != lp.n_mu1 {
        return Err(DiscretizeError::Dimension {
            expected: lp.n_columns(),
            got: weights.w0.len() + weights.w1.len(),
        });
    }
    let w: Vec<f64> = weights.w0.iter().chain(&weights.w1).copied().collect();
    Ok(residuals(lp, &w))
}

pub(crate) fn residuals(lp: &DiscreteLP, w: &[f64]) -> (f64, f64) {
    let eq = lp
        .eq
        .mul_vec(w)
        .iter()
        .zip(&lp.eq_rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ineq = lp
        .ineq
        .mul_vec(w)
        .iter()
        .zip(&lp.ineq_rhs)
        .map(|(a, b)| (a - b).max(0.0))
        .fold(0.0, f64::max);
    (eq, ineq)
}
