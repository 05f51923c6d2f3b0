use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use singular_lp::basis::BasisFamily;
use singular_lp::discretize::{assemble_lp, build_grid, constraint_residual, DiscreteLP, Grid};
use singular_lp::model::{
    finite_fuel, inventory, inventory_discounted, validate_conditions, Criterion, FiniteFuelParams, InventoryParams,
    ProblemFile, ProblemSpec, ValidationReport,
};
use singular_lp::policy::{
    boundary_mass_diagnostic, marginals_and_kernels, with_strict, FeedbackPolicy, MeasurePair, StrictReport,
    DEFAULT_DEGENERACY_TOL,
};
use singular_lp::simplex::{export_mps, parse_mps, solve, LPSolution, LPStatus};
use singular_lp::verify::{band_search, probe_functions, simulate, BandSearch, SimConfig, VerificationReport, VerifyError};

use crate::config::{Mode, RunConfig};
use crate::error::{io_error, CliError};

/// Largest equality or inequality residual accepted in reports.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Largest `|mean| / standard error` of a martingale residual.
pub const MARTINGALE_Z: f64 = 3.0;
pub const STATIONARITY_TV: f64 = 0.1;

/// A resolved problem with the text its hash is taken over: the file
/// contents, or the canonical rendering of a built-in.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub text: String,
    pub sha256: String,
}

pub fn resolve_problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    let builtin = match cfg.problem.as_str() {
        "inventory" => Some(match cfg.alpha {
            Some(alpha) => inventory_discounted(&InventoryParams::default(), alpha, 1.0),
            None => inventory(&InventoryParams::default()),
        }),
        "finite-fuel" => {
            let defaults = FiniteFuelParams::default();
            Some(finite_fuel(&FiniteFuelParams { alpha: cfg.alpha.unwrap_or(defaults.alpha), ..defaults }))
        }
        _ => None,
    };
    let (spec, text) = match builtin {
        Some(spec) => {
            spec.check()?;
            let text = ProblemFile::render(&spec)?;
            (spec, text)
        }
        None => {
            let path = Path::new(&cfg.problem);
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "problem `{}` is neither a file nor one of: inventory, finite-fuel",
                    cfg.problem
                )));
            }
            let text = fs::read_to_string(path).map_err(io_error(path))?;
            let mut spec = ProblemFile::parse(&text)?;
            if let Some(alpha) = cfg.alpha {
                match &mut spec.criterion {
                    Criterion::Discounted { alpha: a, .. } => *a = alpha,
                    Criterion::LongTermAverage => {
                        return Err(CliError::Config("--alpha given for a long-term-average problem file".into()))
                    }
                }
                spec.check()?;
            }
            (spec, text)
        }
    };
    let sha256 = Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    Ok(Problem { spec, text, sha256 })
}

/// Paths written by a run, in order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct ProblemRef<'a> {
    name: &'a str,
    sha256: &'a str,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig,
    problem: ProblemRef<'a>,
    #[serde(flatten)]
    body: T,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    problem: Problem,
    outcome: Outcome,
}

impl<'a> Run<'a> {
    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.cfg.out.join(name);
        fs::write(&path, contents).map_err(io_error(&path))?;
        self.outcome.artifacts.push(path.clone());
        Ok(path)
    }

    fn report<T: Serialize>(&mut self, name: &str, body: T) -> Result<PathBuf, CliError> {
        let envelope = Envelope {
            config: self.cfg,
            problem: ProblemRef { name: &self.problem.spec.name, sha256: &self.problem.sha256 },
            body,
        };
        let text = serde_json::to_string_pretty(&envelope).map_err(|e| CliError::Config(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    fn note(&mut self, line: String) {
        self.outcome.summary.push(line);
    }

    fn grid_and_basis(&self) -> Result<(Grid, BasisFamily), CliError> {
        let spec = &self.problem.spec;
        let grid = build_grid(spec, self.cfg.n_state, self.cfg.n_control)?;
        let basis = match self.cfg.basis {
            Some(n) => BasisFamily::uniform(spec.state.x_lo, spec.state.x_hi, n, true),
            None => BasisFamily::on_knots(&grid.state_nodes, true),
        };
        Ok((grid, basis))
    }

    fn assemble(&self, grid: &Grid, basis: &BasisFamily) -> Result<DiscreteLP, CliError> {
        Ok(assemble_lp(&self.problem.spec, grid, basis, self.cfg.form.into())?)
    }

    fn validate(&mut self, grid: &Grid, basis: &BasisFamily) -> Result<ValidationReport, CliError> {
        let report = validate_conditions(&self.problem.spec, grid, &basis.functions);
        self.report("validation.json", ValidationBody { passed: report.passed(), validation: &report })?;
        self.note(format!("validation {}", if report.passed() { "passed" } else { "failed" }));
        Ok(report)
    }

    fn solve(&mut self, grid: &Grid, lp: &DiscreteLP) -> Result<Solved, CliError> {
        let (objective_csv, eq_csv, ineq_csv) = lp.to_csv();
        self.write("lp_objective.csv", &objective_csv)?;
        self.write("lp_equalities.csv", &eq_csv)?;
        self.write("lp_inequalities.csv", &ineq_csv)?;
        let solution = solve(lp, self.cfg.tol, self.cfg.max_iter)?;
        let residuals = (solution.status == LPStatus::Optimal)
            .then(|| {
                let measures = MeasurePair::from_columns(lp, &solution.weights);
                constraint_residual(lp, &measures).map(|(equality, inequality)| Residuals {
                    equality,
                    inequality,
                    mass_error: (measures.mass0() - lp.required_mass).abs(),
                })
            })
            .transpose()?;
        self.report(
            "solution.json",
            SolutionBody {
                status: solution.status,
                objective: solution.objective,
                iterations: solution.iterations,
                columns: lp.n_columns(),
                equality_rows: lp.eq.rows,
                inequality_rows: lp.ineq.rows,
                required_mass: lp.required_mass,
                residuals: residuals.as_ref(),
            },
        )?;
        let labels: Vec<String> = lp.eq_labels.iter().chain(&lp.ineq_labels).map(|l| l.mps_name()).collect();
        match solution.status {
            LPStatus::Optimal => {
                self.write("weights.csv", &weights_csv(grid, lp, &solution.weights))?;
                self.write("duals.csv", &multipliers_csv("dual", &labels, &solution.dual))?;
                self.note(format!("LP optimal, objective {:?} after {} pivots", solution.objective, solution.iterations));
                Ok(Solved { solution, residuals: residuals.expect("optimal") })
            }
            LPStatus::Infeasible => {
                let ray = solution.farkas.clone().unwrap_or_default();
                let path = self.write("farkas.csv", &multipliers_csv("multiplier", &labels, &ray))?;
                Err(CliError::Infeasible(path))
            }
            LPStatus::Unbounded => Err(CliError::Unbounded),
            LPStatus::IterLimit => Err(CliError::IterLimit(solution.iterations)),
        }
    }

    fn policy(&mut self, grid: &Grid, lp: &DiscreteLP, solved: &Solved) -> Result<FeedbackPolicy, CliError> {
        let measures = MeasurePair::from_columns(lp, &solved.solution.weights);
        let (policy, strict) = with_strict(&marginals_and_kernels(grid, &measures)?, DEFAULT_DEGENERACY_TOL);
        let boundary_mass = boundary_mass_diagnostic(&policy, 0.05);
        self.write("policy.csv", &policy_csv(&policy))?;
        self.report("policy.json", PolicyBody { boundary_mass, strict: &strict, policy: &policy })?;
        self.note(format!(
            "policy: {} μ1 support nodes, {}",
            policy.mu1_marginal.len(),
            if strict.is_strict() { "strict" } else { "relaxed" }
        ));
        Ok(policy)
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.cfg.dt,
            horizon: self.cfg.horizon,
            n_paths: self.cfg.paths,
            seed: self.cfg.seed,
            burn_in: self.cfg.burn_in,
            enforce_budget: self.cfg.enforce_budget,
        }
    }

    fn verify(&mut self, policy: &FeedbackPolicy, basis: &BasisFamily) -> Result<VerificationReport, CliError> {
        let probes = probe_functions(basis, self.cfg.probes);
        let report = simulate(&self.problem.spec, policy, &self.sim_config(), &probes)?;
        self.write("verification.csv", &report.to_csv())?;
        self.report("verification.json", &report)?;
        self.note(format!("simulated cost {:?} ± {:?}", report.cost.mean, report.cost.half_width));
        Ok(report)
    }

    fn band(&mut self) -> Result<BandSearch, CliError> {
        if self.problem.spec.criterion != Criterion::LongTermAverage {
            return Err(CliError::Verify(VerifyError::NotBandShape("criterion is not long-term average".into())));
        }
        let cfg = SimConfig { dt: self.cfg.band_dt, n_paths: self.cfg.cycles, seed: self.cfg.seed, ..SimConfig::default() };
        let search = band_search(&self.problem.spec, &self.cfg.s_grid.values(), &self.cfg.big_s_grid.values(), &cfg)?;
        let mut csv = String::from("s,S,cost,cost_half_width,cycle_length,cycle_length_half_width\n");
        for e in &search.table {
            let _ = writeln!(
                csv,
                "{:?},{:?},{:?},{:?},{:?},{:?}",
                e.band.s, e.band.big_s, e.cost.mean, e.cost.half_width, e.cycle_length.mean, e.cycle_length.half_width
            );
        }
        self.write("band_search.csv", &csv)?;
        self.report("band_search.json", &search)?;
        let b = &search.best;
        self.note(format!("best band ({:?}, {:?}) cost {:?} ± {:?}", b.band.s, b.band.big_s, b.cost.mean, b.cost.half_width));
        Ok(search)
    }

    fn export(&mut self, lp: &DiscreteLP) -> Result<(), CliError> {
        let name = mps_name(&self.problem.spec.name);
        let text = export_mps(lp, &name);
        let (back, back_name) = parse_mps(&text)?;
        if back_name != name || export_mps(&back, &back_name) != text {
            return Err(CliError::MpsRoundTrip);
        }
        self.write("problem.mps", &text)?;
        self.note(format!("MPS with {} rows and {} columns round-trips", lp.eq.rows + lp.ineq.rows, lp.n_columns()));
        Ok(())
    }
}

struct Solved {
    solution: LPSolution,
    residuals: Residuals,
}

#[derive(Debug, Clone, Serialize)]
struct Residuals {
    equality: f64,
    inequality: f64,
    mass_error: f64,
}

#[derive(Serialize)]
struct ValidationBody<'a> {
    passed: bool,
    validation: &'a ValidationReport,
}

#[derive(Serialize)]
struct SolutionBody<'a> {
    status: LPStatus,
    objective: f64,
    iterations: usize,
    columns: usize,
    equality_rows: usize,
    inequality_rows: usize,
    required_mass: f64,
    residuals: Option<&'a Residuals>,
}

#[derive(Serialize)]
struct PolicyBody<'a> {
    boundary_mass: f64,
    strict: &'a StrictReport,
    policy: &'a FeedbackPolicy,
}

/// One pass/fail line of the consolidated report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }
}

#[derive(Serialize)]
struct ReportBody<'a> {
    passed: bool,
    lp_objective: f64,
    simulated_cost: (f64, f64),
    band_cost: Option<(f64, f64)>,
    band: Option<(f64, f64)>,
    checks: &'a [Check],
}

/// `|a − b| ≤ max(5% of the larger magnitude, combined half-widths)`.
pub fn agree(a: (f64, f64), b: (f64, f64)) -> bool {
    let scale = a.0.abs().max(b.0.abs());
    (a.0 - b.0).abs() <= (0.05 * scale).max(a.1 + b.1)
}

fn mps_name(name: &str) -> String {
    let cleaned: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    if cleaned.is_empty() {
        "problem".to_string()
    } else {
        cleaned
    }
}

fn weights_csv(grid: &Grid, lp: &DiscreteLP, weights: &[f64]) -> String {
    let mut out = String::from("col,measure,x,u,weight\n");
    for (j, w) in weights.iter().enumerate() {
        let (measure, atom) =
            if j < lp.n_mu0 { ("mu0", &grid.mu0_atoms[j]) } else { ("mu1", &grid.mu1_atoms[j - lp.n_mu0]) };
        let _ = writeln!(out, "{j},{measure},{:?},{:?},{w:?}", atom.x, atom.u);
    }
    out
}

fn multipliers_csv(column: &str, labels: &[String], values: &[f64]) -> String {
    let mut out = format!("row,label,{column}\n");
    for (i, (label, v)) in labels.iter().zip(values).enumerate() {
        let _ = writeln!(out, "{i},{label},{v:?}");
    }
    out
}

fn policy_csv(policy: &FeedbackPolicy) -> String {
    let mut out = String::from("node,x,mu0,mu1,u0_mode,u1_mode\n");
    let mass = |list: &[singular_lp::policy::NodeMass], node: usize| {
        list.iter().find(|m| m.node == node).map_or(0.0, |m| m.mass)
    };
    let mode = |k: &singular_lp::policy::Kernel, node: usize| k.row(node).map_or(String::new(), |r| format!("{:?}", r.argmax().0));
    for (node, x) in policy.state_nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "{node},{x:?},{:?},{:?},{},{}",
            mass(&policy.mu0_marginal, node),
            mass(&policy.mu1_marginal, node),
            mode(&policy.eta0, node),
            mode(&policy.eta1, node)
        );
    }
    out
}

fn martingale_check(report: &VerificationReport) -> Check {
    let worst = report
        .martingale_residuals
        .iter()
        .map(|m| if m.mean == 0.0 { 0.0 } else { m.mean.abs() / m.std_error })
        .fold(0.0, f64::max);
    Check::new(
        "martingale_residuals",
        worst <= MARTINGALE_Z,
        format!("largest |mean|/SE {worst:.3} over {} probes", report.martingale_residuals.len()),
    )
}

/// Runs one mode, writing its artifacts under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let problem = resolve_problem(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(io_error(&cfg.out))?;
    let mut run = Run { cfg, problem, outcome: Outcome::default() };
    match cfg.mode {
        Mode::Validate => {
            let (grid, basis) = run.grid_and_basis()?;
            let report = run.validate(&grid, &basis)?;
            if !report.passed() {
                let mut reasons = report.negative_values.clone();
                reasons.extend(report.domain_errors.iter().cloned());
                if !report.singular_cost_bounded_away {
                    reasons.push("no singular charge is bounded away from zero".into());
                }
                if !report.constant_annihilated {
                    reasons.push("generators do not annihilate constants".into());
                }
                if !report.generators_finite {
                    reasons.push("a generator value is not finite".into());
                }
                return Err(CliError::Validation(reasons.join("; ")));
            }
        }
        Mode::Solve => {
            let (grid, basis) = run.grid_and_basis()?;
            let lp = run.assemble(&grid, &basis)?;
            run.solve(&grid, &lp)?;
        }
        Mode::Policy => {
            let (grid, basis) = run.grid_and_basis()?;
            let lp = run.assemble(&grid, &basis)?;
            let solved = run.solve(&grid, &lp)?;
            run.policy(&grid, &lp, &solved)?;
        }
        Mode::Verify => {
            let (grid, basis) = run.grid_and_basis()?;
            let lp = run.assemble(&grid, &basis)?;
            let solved = run.solve(&grid, &lp)?;
            let policy = run.policy(&grid, &lp, &solved)?;
            run.verify(&policy, &basis)?;
        }
        Mode::BandOracle => {
            run.band()?;
        }
        Mode::ExportMps => {
            let (grid, basis) = run.grid_and_basis()?;
            let lp = run.assemble(&grid, &basis)?;
            run.export(&lp)?;
        }
        Mode::Report => report(&mut run)?,
    }
    Ok(run.outcome)
}

fn report(run: &mut Run) -> Result<(), CliError> {
    let (grid, basis) = run.grid_and_basis()?;
    let validation = run.validate(&grid, &basis)?;
    let lp = run.assemble(&grid, &basis)?;
    let solved = run.solve(&grid, &lp)?;
    let policy = run.policy(&grid, &lp, &solved)?;
    let sim = run.verify(&policy, &basis)?;
    let lp_cost = (solved.solution.objective, 0.0);
    let sim_cost = (sim.cost.mean, sim.cost.half_width);

    let r = &solved.residuals;
    let mut checks = vec![
        Check::new("standing_conditions", validation.passed(), String::new()),
        Check::new(
            "adjoint_exactness",
            r.equality <= RESIDUAL_TOL && r.inequality <= RESIDUAL_TOL && r.mass_error <= RESIDUAL_TOL,
            format!("equality {:.3e}, inequality {:.3e}, mass {:.3e}", r.equality, r.inequality, r.mass_error),
        ),
        martingale_check(&sim),
        Check::new(
            "lp_vs_simulation",
            agree(lp_cost, sim_cost),
            format!("{:?} vs {:?} ± {:?}", lp_cost.0, sim_cost.0, sim_cost.1),
        ),
    ];
    for (budget, spent) in run.problem.spec.costs.budgets.iter().zip(&sim.budgets) {
        checks.push(Check::new(
            &format!("budget_{}", budget.name),
            spent.mean - spent.half_width <= budget.bound,
            format!("simulated spend {:?} ± {:?} against bound {:?}", spent.mean, spent.half_width, budget.bound),
        ));
    }
    if let Some(tv) = sim.stationarity_distance {
        checks.push(Check::new("stationarity", tv <= STATIONARITY_TV, format!("total variation {tv:.4}")));
    }

    let band = match run.band() {
        Ok(search) => Some(search.best),
        Err(CliError::Verify(VerifyError::NotBandShape(why))) => {
            run.note(format!("band oracle skipped: {why}"));
            None
        }
        Err(CliError::Verify(VerifyError::NonNegativeDemand(rate))) => {
            run.note(format!("band oracle skipped: demand rate {rate}"));
            None
        }
        Err(e) => return Err(e),
    };
    if let Some(best) = &band {
        let band_cost = (best.cost.mean, best.cost.half_width);
        checks.push(Check::new(
            "lp_vs_band_oracle",
            agree(lp_cost, band_cost),
            format!("{:?} vs {:?} ± {:?}", lp_cost.0, band_cost.0, band_cost.1),
        ));
        checks.push(Check::new(
            "simulation_vs_band_oracle",
            agree(sim_cost, band_cost),
            format!("{:?} ± {:?} vs {:?} ± {:?}", sim_cost.0, sim_cost.1, band_cost.0, band_cost.1),
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    run.report(
        "report.json",
        ReportBody {
            passed,
            lp_objective: lp_cost.0,
            simulated_cost: sim_cost,
            band_cost: band.as_ref().map(|b| (b.cost.mean, b.cost.half_width)),
            band: band.as_ref().map(|b| (b.band.s, b.band.big_s)),
            checks: &checks,
        },
    )?;
    for c in &checks {
        run.note(format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agreement_uses_the_wider_of_relative_and_interval_slack() {
        assert!(agree((1.0, 0.0), (1.04, 0.0)));
        assert!(!agree((1.0, 0.0), (1.1, 0.0)));
        assert!(agree((1.0, 0.05), (1.1, 0.06)));
    }

    #[test]
    fn mps_names_are_single_tokens() {
        assert_eq!(mps_name("finite fuel"), "finite_fuel");
        assert_eq!(mps_name(""), "problem");
    }

    #[test]
    fn builtins_hash_their_canonical_text() {
        let cfg = RunConfig::new("inventory", Mode::Solve, "unused");
        let a = resolve_problem(&cfg).unwrap();
        assert_eq!(a.sha256.len(), 64);
        assert_eq!(a.sha256, resolve_problem(&cfg).unwrap().sha256);
        let discounted = RunConfig { alpha: Some(0.5), ..cfg };
        assert_ne!(resolve_problem(&discounted).unwrap().sha256, a.sha256);
    }
}
