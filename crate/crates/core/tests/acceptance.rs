//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::time::Instant;

use singular_lp::basis::{BasisFamily, BasisFunction};
use singular_lp::discretize::{
    adjoint_row, assemble_lp, build_grid, constraint_residual, DiscountedForm, DiscreteLP, Formulation, Grid,
};
use singular_lp::model::{finite_fuel, inventory, inventory_discounted, FiniteFuelParams, InventoryParams, ProblemSpec, ScalarFn};
use singular_lp::policy::{marginals_and_kernels, FeedbackPolicy, MeasurePair};
use singular_lp::simplex::{solve, LPSolution, LPStatus};
use singular_lp::verify::{band_policy_oracle, band_search, probe_functions, simulate, BandPolicy, SimConfig, VerificationReport};

const TOL: f64 = 1e-9;
const MAX_ITER: usize = 200_000;

/// Adjoint-exactness observations gathered from every optimal solve.
#[derive(Default)]
struct Exactness {
    solves: usize,
    worst_eq: f64,
    worst_mass: f64,
    constant_row_violations: usize,
    notes: Vec<String>,
}

struct Solved {
    lp: DiscreteLP,
    grid: Grid,
    solution: LPSolution,
}

fn formulation(problem: &ProblemSpec, form: DiscountedForm) -> Formulation {
    match problem.criterion.alpha() {
        Some(_) => Formulation::Discounted(form),
        None => Formulation::LongTermAverage,
    }
}

fn solve_checked(
    problem: &ProblemSpec,
    grid: Grid,
    basis: &BasisFamily,
    form: DiscountedForm,
    exact: &mut Exactness,
) -> Solved {
    let lp = assemble_lp(problem, &grid, basis, form).expect("assembly");
    let solution = solve(&lp, TOL, MAX_ITER).expect("solver");
    if solution.status == LPStatus::Optimal {
        let measures = MeasurePair::from_columns(&lp, &solution.weights);
        let (eq, _) = constraint_residual(&lp, &measures).expect("residual");
        exact.solves += 1;
        exact.worst_eq = exact.worst_eq.max(eq);
        exact.worst_mass = exact.worst_mass.max((measures.mass0() - lp.required_mass).abs());
        let fm = formulation(problem, form);
        let (row, _) = adjoint_row(problem, &grid, &BasisFunction::Constant, fm).expect("constant row");
        let alpha = problem.criterion.alpha().unwrap_or(0.0);
        let generator_part_is_zero = match fm {
            Formulation::Discounted(DiscountedForm::Rescaled) => {
                row[..lp.n_mu0].iter().all(|v| *v == -alpha) && row[lp.n_mu0..].iter().all(|v| *v == 0.0)
            }
            _ => {
                let value: f64 = row.iter().zip(&solution.weights).map(|(a, w)| a * w).sum();
                row.iter().all(|v| *v == 0.0) && value == 0.0
            }
        };
        if !generator_part_is_zero {
            exact.constant_row_violations += 1;
            exact.notes.push(format!("{} {:?}", problem.name, form));
        }
    }
    Solved { lp, grid, solution }
}

fn policy_of(s: &Solved) -> FeedbackPolicy {
    marginals_and_kernels(&s.grid, &MeasurePair::from_columns(&s.lp, &s.solution.weights)).expect("policy")
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, title: &str, o: &Outcome, failures: &mut usize) {
    println!("{} {id} {title}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    if !o.passed {
        *failures += 1;
    }
}

fn agree(a: (f64, f64), b: (f64, f64)) -> bool {
    let scale = a.0.abs().max(b.0.abs());
    (a.0 - b.0).abs() <= (0.05 * scale).max(a.1 + b.1)
}

fn martingale_ok(r: &VerificationReport) -> (bool, f64) {
    let worst = r
        .martingale_residuals
        .iter()
        .map(|m| if m.mean == 0.0 { 0.0 } else { m.mean.abs() / m.std_error })
        .fold(0.0, f64::max);
    (worst <= 3.0, worst)
}

fn criterion_1(exact: &mut Exactness) -> (Outcome, FeedbackPolicy, VerificationReport) {
    let started = Instant::now();
    let problem = inventory(&InventoryParams::default());
    let grid = build_grid(&problem, 201, 101).unwrap();
    let basis = BasisFamily::on_knots(&grid.state_nodes, true);
    let solved = solve_checked(&problem, grid, &basis, DiscountedForm::Normalized, exact);
    let lp_cost = solved.solution.objective;
    let policy = policy_of(&solved);

    let cfg = SimConfig { dt: 1e-3, horizon: 200.0, n_paths: 200, seed: 11, burn_in: 10.0, enforce_budget: None };
    let sim = simulate(&problem, &policy, &cfg, &probe_functions(&basis, 9)).expect("simulation");

    let s_grid: Vec<f64> = (0..=10).map(|i| -1.6 + 0.1 * i as f64).collect();
    let big_grid: Vec<f64> = (0..=9).map(|i| 0.4 + 0.1 * i as f64).collect();
    let band_cfg = SimConfig { dt: 0.01, n_paths: 3000, seed: 5, ..SimConfig::default() };
    let band = band_search(&problem, &s_grid, &big_grid, &band_cfg).expect("band search");

    let lp = (lp_cost, 0.0);
    let sm = (sim.cost.mean, sim.cost.half_width);
    let bd = (band.best.cost.mean, band.best.cost.half_width);
    let elapsed = started.elapsed().as_secs_f64();
    let passed = solved.solution.status == LPStatus::Optimal && agree(lp, sm) && agree(lp, bd) && agree(sm, bd) && elapsed <= 600.0;
    let detail = format!(
        "LP {:.5} ({} cols, {} pivots), simulated {:.5} ± {:.5}, band ({:.1}, {:.1}) {:.5} ± {:.5}; {:.0} s",
        lp_cost,
        solved.lp.n_columns(),
        solved.solution.iterations,
        sm.0,
        sm.1,
        band.best.band.s,
        band.best.band.big_s,
        bd.0,
        bd.1,
        elapsed
    );
    (Outcome { passed, detail }, policy, sim)
}

fn criterion_2(exact: &mut Exactness) -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    let mut all_optimal = true;
    for alpha in [0.1, 1.0] {
        let problems = [
            (inventory_discounted(&InventoryParams::default(), alpha, 1.0), 81, 41),
            (finite_fuel(&FiniteFuelParams { alpha, ..FiniteFuelParams::default() }), 81, 21),
        ];
        for (problem, n_state, n_control) in problems {
            let grid = build_grid(&problem, n_state, n_control).unwrap();
            let basis = BasisFamily::on_knots(&grid.state_nodes, true);
            let normalized = solve_checked(&problem, grid.clone(), &basis, DiscountedForm::Normalized, exact);
            let rescaled = solve_checked(&problem, grid, &basis, DiscountedForm::Rescaled, exact);
            all_optimal &= normalized.solution.status == LPStatus::Optimal && rescaled.solution.status == LPStatus::Optimal;
            let (a, b) = (normalized.solution.objective, rescaled.solution.objective);
            worst_gap = worst_gap.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
            let moved = MeasurePair::from_columns(&rescaled.lp, &rescaled.solution.weights).scaled(alpha);
            let (eq, ineq) = constraint_residual(&normalized.lp, &moved).unwrap();
            worst_residual = worst_residual.max(eq).max(ineq);
        }
    }
    Outcome {
        passed: all_optimal && worst_gap <= 1e-6 && worst_residual <= 1e-8,
        detail: format!("max relative objective gap {worst_gap:.2e}, max residual of α-scaled weights {worst_residual:.2e}"),
    }
}

fn criterion_4(inventory_sim: &VerificationReport, exact: &mut Exactness) -> Outcome {
    let problem = finite_fuel(&FiniteFuelParams::default());
    let grid = build_grid(&problem, 161, 21).unwrap();
    let basis = BasisFamily::on_knots(&grid.state_nodes, true);
    let solved = solve_checked(&problem, grid, &basis, DiscountedForm::Normalized, exact);
    let policy = policy_of(&solved);
    let cfg = SimConfig { dt: 1e-4, horizon: 0.0, n_paths: 200, seed: 13, burn_in: 0.0, enforce_budget: None };
    let fuel_sim = simulate(&problem, &policy, &cfg, &probe_functions(&basis, 9)).expect("simulation");
    let (inv_ok, inv_worst) = martingale_ok(inventory_sim);
    let (fuel_ok, fuel_worst) = martingale_ok(&fuel_sim);
    Outcome {
        passed: inv_ok && fuel_ok && inventory_sim.cost.n >= 200 && fuel_sim.cost.n >= 200,
        detail: format!(
            "largest |mean|/SE: inventory {inv_worst:.2} over {} probes, finite fuel {fuel_worst:.2} over {} probes",
            inventory_sim.martingale_residuals.len(),
            fuel_sim.martingale_residuals.len()
        ),
    }
}

fn criterion_5(sim: &VerificationReport) -> Outcome {
    let d = sim.stationarity_distance.unwrap_or(f64::INFINITY);
    Outcome { passed: d <= 0.1, detail: format!("total variation {d:.4}") }
}

fn criterion_6(exact: &mut Exactness) -> Outcome {
    let levels = [(26, 11), (51, 21), (101, 41)];
    let mut lines = Vec::new();
    let mut passed = true;
    let cases: [(ProblemSpec, BasisFamily); 2] = [
        (inventory(&InventoryParams::default()), BasisFamily::uniform(-3.0, 5.0, 24, true)),
        (finite_fuel(&FiniteFuelParams::default()), BasisFamily::uniform(-4.0, 4.0, 24, true)),
    ];
    for (problem, basis) in cases {
        let mut objectives = Vec::new();
        for (n_state, n_control) in levels {
            let grid = build_grid(&problem, n_state, n_control).unwrap();
            let s = solve_checked(&problem, grid, &basis, DiscountedForm::Normalized, exact);
            passed &= s.solution.status == LPStatus::Optimal;
            objectives.push(s.solution.objective);
        }
        passed &= objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        lines.push(format!("{} {:?}", problem.name, objectives.iter().map(|o| format!("{o:.6}")).collect::<Vec<_>>()));
    }
    Outcome { passed, detail: lines.join("; ") }
}

fn criterion_7(exact: &mut Exactness) -> Outcome {
    let mut objectives = Vec::new();
    let mut passed = true;
    for fuel in [0.5, 1.0, 2.0] {
        let problem = finite_fuel(&FiniteFuelParams { fuel, ..FiniteFuelParams::default() });
        let grid = build_grid(&problem, 81, 21).unwrap();
        let basis = BasisFamily::on_knots(&grid.state_nodes, true);
        let s = solve_checked(&problem, grid, &basis, DiscountedForm::Normalized, exact);
        passed &= s.solution.status == LPStatus::Optimal;
        objectives.push(s.solution.objective);
    }
    passed &= objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    Outcome { passed, detail: format!("fuel 0.5, 1, 2 → {objectives:.6?}") }
}

struct Case {
    name: &'static str,
    lp: DiscreteLP,
    status: LPStatus,
    objective: Option<f64>,
    weights: Option<Vec<f64>>,
}

fn case(
    name: &'static str,
    c: Vec<f64>,
    eq: &[Vec<f64>],
    b: Vec<f64>,
    le: &[Vec<f64>],
    h: Vec<f64>,
    status: LPStatus,
    objective: Option<f64>,
    weights: Option<Vec<f64>>,
) -> Case {
    Case { name, lp: DiscreteLP::generic(c, eq, b, le, h), status, objective, weights }
}

fn corpus() -> Vec<Case> {
    use LPStatus::*;
    vec![
        case("tie", vec![1.0, 1.0], &[vec![1.0, 1.0]], vec![1.0], &[], vec![], Optimal, Some(1.0), Some(vec![1.0, 0.0])),
        case("ray", vec![-1.0, 0.0], &[vec![1.0, -1.0]], vec![0.0], &[], vec![], Unbounded, None, None),
        case("sign", vec![0.0], &[vec![1.0]], vec![-1.0], &[], vec![], Infeasible, None, None),
        case(
            "two_le",
            vec![-1.0, -2.0],
            &[],
            vec![],
            &[vec![1.0, 1.0], vec![1.0, 3.0]],
            vec![4.0, 6.0],
            Optimal,
            Some(-5.0),
            Some(vec![3.0, 1.0]),
        ),
        case("mixed", vec![2.0, 3.0], &[vec![1.0, 1.0]], vec![2.0], &[vec![1.0, 0.0]], vec![1.0], Optimal, Some(5.0), Some(vec![1.0, 1.0])),
        case("eq_vs_le", vec![0.0, 0.0], &[vec![1.0, 1.0]], vec![2.0], &[vec![1.0, 1.0]], vec![1.0], Infeasible, None, None),
        case("open_le", vec![-1.0, -1.0], &[], vec![], &[vec![1.0, -1.0]], vec![1.0], Unbounded, None, None),
        case(
            "beale",
            vec![-0.75, 20.0, -0.5, 6.0],
            &[],
            vec![],
            &[vec![0.25, -8.0, -1.0, 9.0], vec![0.5, -12.0, -0.5, 3.0], vec![0.0, 0.0, 1.0, 0.0]],
            vec![0.0, 0.0, 1.0],
            Optimal,
            Some(-1.25),
            Some(vec![1.0, 0.0, 1.0, 0.0]),
        ),
        case(
            "redundant",
            vec![1.0, 2.0],
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
            &[],
            vec![],
            Optimal,
            Some(1.0),
            Some(vec![1.0, 0.0]),
        ),
        case("negative_rhs", vec![1.0, 2.0], &[vec![-1.0, -1.0]], vec![-3.0], &[], vec![], Optimal, Some(3.0), Some(vec![3.0, 0.0])),
        case(
            "assignment",
            vec![1.0, 2.0, 3.0, 1.0],
            &[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]],
            vec![1.0; 4],
            &[],
            vec![],
            Optimal,
            Some(2.0),
            Some(vec![1.0, 0.0, 0.0, 1.0]),
        ),
        case("negative_le", vec![1.0, 1.0], &[], vec![], &[vec![1.0, 1.0]], vec![-1.0], Infeasible, None, None),
    ]
}

/// Rows of the LP in order (equalities, then inequalities) with a flag for
/// the inequality ones.
fn rows(lp: &DiscreteLP) -> Vec<(&[f64], f64, bool)> {
    (0..lp.eq.rows)
        .map(|i| (lp.eq.row(i), lp.eq_rhs[i], false))
        .chain((0..lp.ineq.rows).map(|i| (lp.ineq.row(i), lp.ineq_rhs[i], true)))
        .collect()
}

fn check_case(c: &Case) -> Result<(), String> {
    let s = solve(&c.lp, TOL, 1000).map_err(|e| e.to_string())?;
    if s.status != c.status {
        return Err(format!("status {:?}", s.status));
    }
    if s.iterations >= 1000 {
        return Err("iteration limit".into());
    }
    let rows = rows(&c.lp);
    match s.status {
        LPStatus::Optimal => {
            if let Some(obj) = c.objective {
                if (s.objective - obj).abs() > 1e-12 {
                    return Err(format!("objective {}", s.objective));
                }
            }
            if let Some(w) = &c.weights {
                if s.weights.iter().zip(w).any(|(a, b)| (a - b).abs() > 1e-12) {
                    return Err(format!("weights {:?}", s.weights));
                }
            }
            let dual_objective: f64 = rows.iter().zip(&s.dual).map(|(r, y)| r.1 * y).sum();
            let slack_room = 1e-6 * (1.0 + s.objective.abs());
            if dual_objective > s.objective + slack_room {
                return Err(format!("weak duality: dual {dual_objective} > primal {}", s.objective));
            }
            for j in 0..c.lp.n_columns() {
                let reduced = c.lp.objective[j] - rows.iter().zip(&s.dual).map(|(r, y)| r.0[j] * y).sum::<f64>();
                if reduced < -1e-8 {
                    return Err(format!("reduced cost {reduced} at column {j}"));
                }
                if (reduced * s.weights[j]).abs() > slack_room {
                    return Err(format!("complementary slackness at column {j}"));
                }
            }
            for (r, y) in rows.iter().zip(&s.dual) {
                if r.2 && *y > 1e-8 {
                    return Err(format!("inequality dual {y} has the wrong sign"));
                }
            }
        }
        LPStatus::Infeasible => {
            let ray = s.farkas.as_ref().ok_or("no certificate")?;
            let rhs: f64 = rows.iter().zip(ray).map(|(r, y)| r.1 * y).sum();
            if rhs <= 0.0 {
                return Err(format!("certificate rᵀb = {rhs}"));
            }
            for j in 0..c.lp.n_columns() {
                let v: f64 = rows.iter().zip(ray).map(|(r, y)| r.0[j] * y).sum();
                if v > TOL {
                    return Err(format!("certificate rᵀA = {v} at column {j}"));
                }
            }
            if rows.iter().zip(ray).any(|(r, y)| r.2 && *y > TOL) {
                return Err("certificate has a positive multiplier on a ≤ row".into());
            }
        }
        _ => {}
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let cases = corpus();
    let failures: Vec<String> =
        cases.iter().filter_map(|c| check_case(c).err().map(|e| format!("{}: {e}", c.name))).collect();
    Outcome {
        passed: failures.is_empty() && cases.len() == 12,
        detail: if failures.is_empty() { format!("{} LPs exact, duality and certificates valid", cases.len()) } else { failures.join("; ") },
    }
}

fn criterion_9() -> Outcome {
    let mut p = inventory(&InventoryParams { k1: 3.0, k2: 0.0, ..InventoryParams::default() });
    p.costs.c0 = ScalarFn::constant(0.0);
    let band = BandPolicy::new(0.0, 2.0);
    let (mut length_hits, mut cost_hits) = (0, 0);
    for seed in 0..10 {
        let cfg = SimConfig { dt: 1e-3, n_paths: 4000, seed, ..SimConfig::default() };
        let e = band_policy_oracle(&p, band, &cfg).expect("oracle");
        length_hits += e.cycle_length.covers(2.0) as usize;
        cost_hits += e.cost.covers(1.5) as usize;
    }
    Outcome {
        passed: length_hits >= 8 && cost_hits >= 8,
        detail: format!("cycle length CI covers 2 in {length_hits}/10 seeds, average cost CI covers 1.5 in {cost_hits}/10"),
    }
}

fn main() {
    let mut exact = Exactness::default();
    let mut failures = 0;

    let (c1, _, inventory_sim) = criterion_1(&mut exact);
    report(1, "inventory LTA agreement", &c1, &mut failures);
    let c2 = criterion_2(&mut exact);
    report(2, "discounted form equivalence", &c2, &mut failures);
    let c4 = criterion_4(&inventory_sim, &mut exact);
    let c5 = criterion_5(&inventory_sim);
    let c6 = criterion_6(&mut exact);
    let c7 = criterion_7(&mut exact);
    let c3 = Outcome {
        passed: exact.solves > 0 && exact.worst_eq <= 1e-8 && exact.worst_mass <= 1e-8 && exact.constant_row_violations == 0,
        detail: format!(
            "{} optimal solves, max equality residual {:.2e}, max mass error {:.2e}, constant-row violations {}{}",
            exact.solves,
            exact.worst_eq,
            exact.worst_mass,
            exact.constant_row_violations,
            if exact.notes.is_empty() { String::new() } else { format!(" ({})", exact.notes.join(", ")) }
        ),
    };
    report(3, "adjoint exactness", &c3, &mut failures);
    report(4, "martingale residuals", &c4, &mut failures);
    report(5, "stationarity", &c5, &mut failures);
    report(6, "grid refinement", &c6, &mut failures);
    report(7, "budget monotonicity", &c7, &mut failures);
    report(8, "solver unit corpus", &criterion_8(), &mut failures);
    report(9, "oracle identities", &criterion_9(), &mut failures);

    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
