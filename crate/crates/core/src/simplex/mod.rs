//! Dense two-phase revised simplex for the assembled programs.
//!
//! Rows are equilibrated (row max-abs to 1, then column max-abs to 1) and
//! sign-flipped to a nonnegative right-hand side. Inequality rows get slack
//! columns; rows without a usable slack start on an artificial column.
//! Phase I minimizes the artificial sum, phase II the objective with any
//! artificial still in the basis held at zero. Entering columns follow
//! Dantzig's rule with lowest-index ties and switch to Bland's rule after a
//! streak of degenerate pivots. The basis inverse is kept explicitly, updated
//! by elementary row operations and recomputed from scratch periodically.

mod lu;
mod mps;

use serde::{Deserialize, Serialize};

use crate::discretize::DiscreteLP;

pub use mps::{export_mps, parse_mps, MpsError};

/// Pivots between full recomputations of the basis inverse.
const REFACTOR_PERIOD: usize = 50;
/// Smallest entry of the entering column accepted as a pivot.
const PIVOT_TOL: f64 = 1e-7;
/// Relative rounding allowance on a reduced cost, in units of the summed
/// magnitudes entering it.
const PRICE_NOISE: f64 = 1e-13;
/// Primal feasibility slack allowed by the first pass of the ratio test.
const HARRIS_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum SimplexError {
    #[error("basis became numerically singular at iteration {iteration}")]
    SingularBasis { iteration: usize },
    #[error("tolerance {0} outside [1e-12, 1e-6]")]
    Tolerance(f64),
    #[error("malformed LP: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LPStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPSolution {
    pub status: LPStatus,
    /// One weight per LP column (`w0` then `w1`).
    pub weights: Vec<f64>,
    pub objective: f64,
    /// Duals for the equality rows, then the inequality rows.
    pub dual: Vec<f64>,
    pub iterations: usize,
    /// For `Infeasible`: `r` with `rᵀ·rhs > 0` and `rᵀ·[rows | slacks] ≤ 0`,
    /// scaled to unit max-norm.
    pub farkas: Option<Vec<f64>>,
    /// Line-oriented solver trace, filled when `SolveOptions::verbose` is set.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub log: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive degenerate pivots before Bland's rule takes over.
    pub bland_after: usize,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-9, max_iter: 100_000, bland_after: 50, verbose: false }
    }
}

pub fn solve(lp: &DiscreteLP, tol: f64, max_iter: usize) -> Result<LPSolution, SimplexError> {
    solve_with(lp, &SolveOptions { tol, max_iter, ..SolveOptions::default() })
}

pub fn solve_with(lp: &DiscreteLP, opts: &SolveOptions) -> Result<LPSolution, SimplexError> {
    if !(1e-12..=1e-6).contains(&opts.tol) {
        return Err(SimplexError::Tolerance(opts.tol));
    }
    check_shape(lp)?;
    let mut tableau = StandardForm::new(lp);
    tableau.run(opts)
}

fn check_shape(lp: &DiscreteLP) -> Result<(), SimplexError> {
    let n = lp.n_columns();
    let bad = |what: &str| Err(SimplexError::Malformed(what.to_string()));
    if lp.objective.len() != n || lp.eq.cols != n || lp.ineq.cols != n {
        return bad("column counts disagree");
    }
    if lp.eq.rows != lp.eq_rhs.len() || lp.ineq.rows != lp.ineq_rhs.len() {
        return bad("row counts disagree");
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(&lp.objective) || !finite(&lp.eq.data) || !finite(&lp.ineq.data) || !finite(&lp.eq_rhs) || !finite(&lp.ineq_rhs) {
        return bad("non-finite coefficient");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterLimit,
}

/// Equilibrated, sign-normalized `[A | slacks | artificials] x = b`, `x ≥ 0`.
struct StandardForm {
    m: usize,
    n_struct: usize,
    /// Compressed columns.
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    kind: Vec<Kind>,
    cost: Vec<f64>,
    b: Vec<f64>,
    /// Original row `i` = `row_sign[i] · row_scale[i]⁻¹ ·` scaled row `i`.
    row_scale: Vec<f64>,
    row_sign: Vec<f64>,
    /// Original variable `j` = `col_scale[j] ·` scaled variable `j`.
    col_scale: Vec<f64>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    log: Vec<String>,
}

impl StandardForm {
    fn new(lp: &DiscreteLP) -> Self {
        let n = lp.n_columns();
        let m_eq = lp.eq.rows;
        let m = m_eq + lp.ineq.rows;
        let entry = |i: usize, j: usize| if i < m_eq { lp.eq.get(i, j) } else { lp.ineq.get(i - m_eq, j) };
        let rhs: Vec<f64> = lp.eq_rhs.iter().chain(&lp.ineq_rhs).copied().collect();

        let mut row_scale = vec![1.0; m];
        for (i, scale) in row_scale.iter_mut().enumerate() {
            let max = (0..n).map(|j| entry(i, j).abs()).fold(0.0, f64::max);
            if max > 0.0 {
                *scale = 1.0 / max;
            }
        }
        let row_sign: Vec<f64> = rhs.iter().map(|r| if *r < 0.0 { -1.0 } else { 1.0 }).collect();

        let mut col_start = vec![0];
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        let mut kind = Vec::new();
        let mut col_scale = Vec::new();
        let mut cost = Vec::new();
        let mut push_column = |entries: Vec<(usize, f64)>, k: Kind, c: f64| {
            let max = entries.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
            let s = if max > 0.0 && k != Kind::Artificial { 1.0 / max } else { 1.0 };
            for (i, v) in entries {
                row_idx.push(i);
                vals.push(v * s);
            }
            col_start.push(row_idx.len());
            kind.push(k);
            col_scale.push(s);
            cost.push(c * s);
        };
        for j in 0..n {
            let entries: Vec<(usize, f64)> = (0..m)
                .filter_map(|i| {
                    let v = entry(i, j);
                    (v != 0.0).then(|| (i, v * row_scale[i] * row_sign[i]))
                })
                .collect();
            push_column(entries, Kind::Structural, lp.objective[j]);
        }
        for i in m_eq..m {
            push_column(vec![(i, row_scale[i] * row_sign[i])], Kind::Slack, 0.0);
        }
        let b: Vec<f64> = (0..m).map(|i| rhs[i] * row_scale[i] * row_sign[i]).collect();

        // Start each inequality row on its slack when the slack enters with a
        // positive coefficient; everything else gets an artificial.
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            if i >= m_eq && row_sign[i] > 0.0 {
                basis.push(n + (i - m_eq));
            } else {
                basis.push(usize::MAX);
            }
        }
        let mut next_column = n + (m - m_eq);
        for (i, slot) in basis.iter_mut().enumerate() {
            if *slot == usize::MAX {
                *slot = next_column;
                next_column += 1;
                push_column(vec![(i, 1.0)], Kind::Artificial, 0.0);
            }
        }
        let total = kind.len();
        let mut position = vec![None; total];
        for (i, &j) in basis.iter().enumerate() {
            position[j] = Some(i);
        }
        StandardForm {
            m,
            n_struct: n,
            col_start,
            row_idx,
            vals,
            kind,
            cost,
            b,
            row_scale,
            row_sign,
            col_scale,
            basis,
            position,
            binv: Vec::new(),
            xb: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            log: Vec::new(),
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut dense = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                dense[i * m + k] = v;
            }
        }
        self.binv = lu::invert(m, &dense).map_err(|_| SimplexError::SingularBasis { iteration: self.iterations })?;
        self.xb = self.apply_binv(&self.b);
        // One round of iterative refinement on the basic solution.
        let mut residual = self.b.clone();
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                residual[i] -= v * self.xb[k];
            }
        }
        let correction = self.apply_binv(&residual);
        for (x, c) in self.xb.iter_mut().zip(correction) {
            *x += c;
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn apply_binv(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|r| (0..m).map(|c| self.binv[r * m + c] * v[c]).sum()).collect()
    }

    /// `B⁻¹·a_j` for a stored column.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for (i, v) in self.column(j) {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[r * m + i] * v;
            }
        }
        out
    }

    /// Row prices `yᵀ = c_Bᵀ B⁻¹`.
    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c == 0.0 {
                continue;
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += c * self.binv[r * m + i];
            }
        }
        y
    }

    /// Reduced cost with the rounding noise its evaluation can carry.
    fn priced(&self, j: usize, cost: &[f64], y: &[f64]) -> (f64, f64) {
        let (dot, size) = self.column(j).fold((0.0, cost[j].abs()), |(d, s), (i, v)| (d + y[i] * v, s + (y[i] * v).abs()));
        (cost[j] - dot, PRICE_NOISE * size)
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&j, x)| cost[j] * x).sum()
    }

    fn pivot(&mut self, leave_row: usize, enter: usize, alpha: &[f64], theta: f64) {
        let m = self.m;
        for (i, x) in self.xb.iter_mut().enumerate() {
            if i != leave_row {
                *x -= theta * alpha[i];
                if *x < 0.0 && *x > -1e-13 {
                    *x = 0.0;
                }
            }
        }
        self.xb[leave_row] = theta;
        let p = alpha[leave_row];
        let pivot_row: Vec<f64> = self.binv[leave_row * m..(leave_row + 1) * m].iter().map(|v| v / p).collect();
        for i in 0..m {
            if i == leave_row || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for (k, pv) in pivot_row.iter().enumerate() {
                self.binv[i * m + k] -= f * pv;
            }
        }
        self.binv[leave_row * m..(leave_row + 1) * m].copy_from_slice(&pivot_row);
        let leaving = self.basis[leave_row];
        self.position[leaving] = None;
        self.position[enter] = Some(leave_row);
        self.basis[leave_row] = enter;
        self.since_refactor += 1;
    }

    /// Primal simplex on `cost` until optimality, unboundedness or the
    /// iteration limit. Artificials never enter; in phase II a basic
    /// artificial leaves as soon as the entering column touches its row.
    fn phase(&mut self, cost: &[f64], phase: u8, opts: &SolveOptions) -> Result<PhaseEnd, SimplexError> {
        let mut degenerate_streak = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_PERIOD {
                self.refactor()?;
            }
            if self.iterations >= opts.max_iter {
                return Ok(PhaseEnd::IterLimit);
            }
            let bland = degenerate_streak >= opts.bland_after;
            let y = self.prices(cost);
            let mut enter = None;
            let mut best = -opts.tol;
            for j in 0..self.kind.len() {
                if self.position[j].is_some() || self.kind[j] == Kind::Artificial {
                    continue;
                }
                let (d, noise) = self.priced(j, cost, &y);
                if d < -noise && d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.ftran(q);

            let Some((r, theta)) = self.ratio_test(&alpha, phase, bland) else {
                return Ok(PhaseEnd::Unbounded);
            };
            let leaving = self.basis[r];
            self.pivot(r, q, &alpha, theta);
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            if opts.verbose {
                self.log.push(format!(
                    "iter {} phase {} obj {:.12e} enter {} leave {} rule {}",
                    self.iterations,
                    phase,
                    self.objective(cost),
                    q,
                    leaving,
                    if bland { "bland" } else { "dantzig" }
                ));
            }
        }
    }

    /// Two-pass (Harris) ratio test: bound the step with slightly relaxed
    /// primal bounds, then take the largest pivot among rows within that
    /// bound. Under Bland's rule the exact minimum ratio is used with ties
    /// going to the lowest basic index. Returns the leaving row and step.
    fn ratio_test(&self, alpha: &[f64], phase: u8, bland: bool) -> Option<(usize, f64)> {
        let scale = alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ptol = PIVOT_TOL * scale.max(1.0);
        let locked = |i: usize| phase == 2 && self.kind[self.basis[i]] == Kind::Artificial;
        // A basic artificial in phase II leaves at once when the column
        // touches its row.
        if let Some(i) = (0..self.m).filter(|&i| locked(i) && alpha[i].abs() > ptol).max_by(|&a, &b| {
            alpha[a].abs().total_cmp(&alpha[b].abs()).then(self.basis[b].cmp(&self.basis[a]))
        }) {
            return Some((i, 0.0));
        }
        let candidates = || (0..self.m).filter(move |&i| alpha[i] > ptol);
        let exact = |i: usize| self.xb[i].max(0.0) / alpha[i];
        if bland {
            let best = candidates().map(exact).fold(f64::INFINITY, f64::min);
            return candidates()
                .filter(|&i| exact(i) <= best)
                .min_by_key(|&i| self.basis[i])
                .map(|i| (i, best));
        }
        let bound = candidates()
            .map(|i| (self.xb[i].max(0.0) + HARRIS_TOL) / alpha[i])
            .fold(f64::INFINITY, f64::min);
        let r = candidates()
            .filter(|&i| exact(i) <= bound)
            .max_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(self.basis[b].cmp(&self.basis[a])))?;
        Some((r, exact(r)))
    }

    fn run(&mut self, opts: &SolveOptions) -> Result<LPSolution, SimplexError> {
        if self.m > 0 {
            self.refactor()?;
        } else {
            self.binv.clear();
            self.xb.clear();
        }
        let phase1_cost: Vec<f64> =
            self.kind.iter().map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 }).collect();
        let b_norm = self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let feas_tol = opts.tol.max(1e-9) * (1.0 + b_norm);

        if self.kind.contains(&Kind::Artificial) {
            match self.phase(&phase1_cost, 1, opts)? {
                PhaseEnd::IterLimit => return Ok(self.solution(LPStatus::IterLimit, &phase1_cost, None)),
                PhaseEnd::Unbounded => unreachable!("phase I is bounded below by zero"),
                PhaseEnd::Optimal => {}
            }
            self.refactor()?;
            let infeasibility = self.objective(&phase1_cost);
            if infeasibility > feas_tol {
                let y = self.prices(&phase1_cost);
                let farkas = self.unscale_duals(&y);
                let norm = farkas.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let farkas = farkas.iter().map(|v| v / norm).collect();
                return Ok(self.solution(LPStatus::Infeasible, &phase1_cost, Some(farkas)));
            }
        }

        let mut cost = self.cost.clone();
        for (c, k) in cost.iter_mut().zip(&self.kind) {
            if *k == Kind::Artificial {
                *c = 0.0;
            }
        }
        let status = match self.phase(&cost, 2, opts)? {
            PhaseEnd::Optimal => LPStatus::Optimal,
            PhaseEnd::Unbounded => LPStatus::Unbounded,
            PhaseEnd::IterLimit => LPStatus::IterLimit,
        };
        if self.m > 0 {
            self.refactor()?;
        }
        Ok(self.solution(status, &cost, None))
    }

    fn unscale_duals(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, v)| v * self.row_scale[i] * self.row_sign[i])
            .collect()
    }

    fn solution(&self, status: LPStatus, cost: &[f64], farkas: Option<Vec<f64>>) -> LPSolution {
        let mut weights = vec![0.0; self.n_struct];
        for (k, &j) in self.basis.iter().enumerate() {
            if j < self.n_struct {
                weights[j] = (self.xb[k] * self.col_scale[j]).max(0.0);
            }
        }
        let y = if self.m > 0 { self.prices(cost) } else { Vec::new() };
        let objective = (0..self.n_struct).map(|j| self.cost[j] / self.col_scale[j] * weights[j]).sum();
        LPSolution {
            status,
            weights,
            objective,
            dual: self.unscale_duals(&y),
            iterations: self.iterations,
            farkas,
            log: self.log.clone(),
        }
    }
}
