//! Monte Carlo checks of an extracted policy: cost and budget estimates,
//! martingale residuals of test functions, and the distance between the
//! simulated state distribution and the LP marginal.
//!
//! Singular actions are realized from the support of the `μ1` marginal,
//! split into clusters of adjacent nodes. For jumps, a path that falls to or
//! below the top of an upward-jumping cluster (or rises to the bottom of a
//! downward one) jumps by a control drawn from `η1` at the nearest node of
//! the cluster. For pushes, every cluster becomes a barrier at its edge
//! facing the push direction, and each step is projected back inside the
//! barriers.

mod band;
mod stats;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use band::{band_policy_oracle, band_search, BandEstimate, BandPolicy, BandSearch};
pub use stats::{compensated_sum, total_variation, CompensatedSum, Estimate, Z95};

use crate::basis::{BasisFamily, BasisFunction, TestFunction};
use crate::model::{Criterion, GeneratorB, ModelError, ProblemSpec};
use crate::policy::{FeedbackPolicy, KernelRow};

/// Discounted runs stop once the discount factor falls below this.
pub const DISCOUNT_CUTOFF: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("policy cannot be simulated: {0}")]
    Policy(String),
    #[error("{events} of {steps} steps left the state interval")]
    Truncation { events: u64, steps: u64 },
    #[error("problem is not of band shape: {0}")]
    NotBandShape(String),
    #[error("demand rate {0} is not positive; a cycle may never end")]
    NonNegativeDemand(f64),
    #[error("no (s, S) pair with s < S")]
    EmptyPairs,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Simulated time for long-term-average runs. Discounted runs use the
    /// time at which the discount factor reaches [`DISCOUNT_CUTOFF`].
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Initial stretch of a long-term-average run left out of the estimates.
    pub burn_in: f64,
    /// Budget whose discounted spend is capped pathwise at its bound;
    /// singular actions stop on paths that exhaust it.
    #[serde(default)]
    pub enforce_budget: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-3, horizon: 100.0, n_paths: 200, seed: 0, burn_in: 10.0, enforce_budget: None }
    }
}

impl SimConfig {
    /// Simulated time for `problem`.
    pub fn effective_horizon(&self, problem: &ProblemSpec) -> f64 {
        match problem.criterion.alpha() {
            Some(alpha) => (1.0 / DISCOUNT_CUTOFF).ln() / alpha,
            None => self.horizon,
        }
    }

    fn check(&self, problem: &ProblemSpec) -> Result<(), VerifyError> {
        let horizon = self.effective_horizon(problem);
        let bad = |m: String| Err(VerifyError::Config(m));
        if !(self.dt > 0.0) || self.dt > horizon / 100.0 {
            return bad(format!("dt = {} must be positive and at most horizon/100 = {}", self.dt, horizon / 100.0));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if problem.criterion.alpha().is_none() && !(0.0..horizon).contains(&self.burn_in) {
            return bad(format!("burn_in = {} must lie in [0, horizon)", self.burn_in));
        }
        if let Some(i) = self.enforce_budget {
            if i >= problem.costs.budgets.len() {
                return bad(format!("no budget {i}"));
            }
            if problem.criterion.alpha().is_none() {
                return bad("pathwise budgets need a discounted criterion".into());
            }
        }
        Ok(())
    }
}

/// Adjacent `μ1` support nodes acting as one singular action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCluster {
    pub bottom: f64,
    pub top: f64,
    pub mass: f64,
    /// Mass-weighted push direction or jump size.
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub cost: Estimate,
    pub budgets: Vec<Estimate>,
    pub martingale_residuals: Vec<Estimate>,
    /// Long-term-average runs only.
    pub stationarity_distance: Option<f64>,
    pub horizon: f64,
    /// Bound on the discounted cost beyond the horizon, already included
    /// in the cost half-width.
    pub tail_bound: f64,
    pub steps: u64,
    pub truncation_events: u64,
    /// Steps spent at nodes where `μ0` has no mass, steered by the nearest
    /// covered node.
    pub bridged_steps: u64,
    pub singular_actions: u64,
    pub clusters: Vec<ActionCluster>,
    pub multi_cluster: bool,
    /// Paths whose enforced budget ran out.
    pub exhausted_paths: usize,
}

impl VerificationReport {
    /// One row per quantity: `name,estimate,half_width,n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,estimate,half_width,n\n");
        for e in std::iter::once(&self.cost).chain(&self.budgets).chain(&self.martingale_residuals) {
            out.push_str(&format!("{},{:?},{:?},{}\n", e.name, e.mean, e.half_width, e.n));
        }
        if let Some(d) = self.stationarity_distance {
            out.push_str(&format!("stationarity_distance,{d:?},0.0,{}\n", self.cost.n));
        }
        out
    }
}

/// Evenly spread elements of `basis` (by index) for martingale checks,
/// always including the constant when the family has one.
pub fn probe_functions(basis: &BasisFamily, count: usize) -> Vec<BasisFunction> {
    let mut out: Vec<BasisFunction> = basis.functions.iter().filter(|f| f.is_constant()).cloned().collect();
    let splines: Vec<&BasisFunction> = basis.splines().map(|(_, f)| f).collect();
    if splines.is_empty() || count == 0 {
        return out;
    }
    let count = count.min(splines.len());
    for k in 0..count {
        let idx = if count == 1 { splines.len() / 2 } else { k * (splines.len() - 1) / (count - 1) };
        out.push(splines[idx].clone());
    }
    out
}

/// Node lookup on the policy's uniform state grid.
struct NodeIndex {
    x_lo: f64,
    h: f64,
    last: usize,
}

impl NodeIndex {
    fn new(nodes: &[f64]) -> Self {
        let last = nodes.len() - 1;
        NodeIndex { x_lo: nodes[0], h: (nodes[last] - nodes[0]) / last as f64, last }
    }

    fn nearest(&self, x: f64) -> usize {
        (((x - self.x_lo) / self.h).round().max(0.0) as usize).min(self.last)
    }
}

struct Sampler {
    controls: Vec<f64>,
    pick: Option<WeightedIndex<f64>>,
}

impl Sampler {
    fn new(row: &KernelRow) -> Self {
        let controls = row.controls.iter().map(|c| c.0).collect();
        let pick = (row.controls.len() > 1).then(|| {
            WeightedIndex::new(row.controls.iter().map(|c| c.1)).expect("kernel rows hold positive weights")
        });
        Sampler { controls, pick }
    }

    fn fixed(u: f64) -> Self {
        Sampler { controls: vec![u], pick: None }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match &self.pick {
            None => self.controls[0],
            Some(w) => self.controls[w.sample(rng)],
        }
    }
}

struct JumpCluster {
    bottom: f64,
    top: f64,
    /// Sign of the mean jump: up-jumping clusters act on paths at or below
    /// their top, down-jumping ones on paths at or above their bottom.
    upward: bool,
    first_node: usize,
    /// One sampler per node of the cluster.
    samplers: Vec<Sampler>,
}

struct Barrier {
    level: f64,
    u: f64,
    direction: f64,
}

enum Actions {
    Jumps(Vec<JumpCluster>),
    Reflection { lower: Option<Barrier>, upper: Option<Barrier> },
}

struct Plan<'a> {
    problem: &'a ProblemSpec,
    probes: &'a [BasisFunction],
    index: NodeIndex,
    /// `μ0` control sampler for every state node, bridged across gaps.
    control: Vec<Sampler>,
    bridged: Vec<bool>,
    start: (Vec<f64>, WeightedIndex<f64>),
    actions: Actions,
    alpha: Option<f64>,
    n_steps: usize,
    burn_steps: usize,
    dt: f64,
    enforce: Option<usize>,
}

fn clusters_of(policy: &FeedbackPolicy) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, m) in policy.mu1_marginal.iter().enumerate() {
        match out.last_mut() {
            Some(c) if m.node == policy.mu1_marginal[*c.last().unwrap()].node + 1 => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

fn build_plan<'a>(
    problem: &'a ProblemSpec,
    policy: &FeedbackPolicy,
    cfg: &SimConfig,
    probes: &'a [BasisFunction],
) -> Result<(Plan<'a>, Vec<ActionCluster>), VerifyError> {
    let nodes = &policy.state_nodes;
    if nodes.len() < 2 || policy.mu0_marginal.is_empty() {
        return Err(VerifyError::Policy("policy has no state grid or no μ0 mass".into()));
    }
    let index = NodeIndex::new(nodes);

    let covered: Vec<usize> = policy.eta0.rows.iter().map(|r| r.node).collect();
    let mut control = Vec::with_capacity(nodes.len());
    let mut bridged = Vec::with_capacity(nodes.len());
    for node in 0..nodes.len() {
        let nearest = covered
            .iter()
            .enumerate()
            .min_by_key(|(_, &c)| c.abs_diff(node))
            .map(|(i, _)| i)
            .expect("μ0 has mass");
        let row = &policy.eta0.rows[nearest];
        let strict_u = policy
            .strict
            .as_ref()
            .and_then(|s| s.iter().find(|c| c.node == row.node).and_then(|c| c.u0));
        control.push(match strict_u {
            Some(u) => Sampler::fixed(u),
            None => Sampler::new(row),
        });
        bridged.push(covered[nearest] != node);
    }

    let start = match &problem.criterion {
        Criterion::Discounted { nu0, .. } => {
            (nu0.iter().map(|a| a.0).collect(), WeightedIndex::new(nu0.iter().map(|a| a.1)))
        }
        Criterion::LongTermAverage => (
            policy.mu0_marginal.iter().map(|m| m.x).collect(),
            WeightedIndex::new(policy.mu0_marginal.iter().map(|m| m.mass)),
        ),
    };
    let start = (start.0, start.1.map_err(|e| VerifyError::Policy(format!("initial distribution: {e}")))?);

    let groups = clusters_of(policy);
    let mut summaries = Vec::with_capacity(groups.len());
    let row1 = |i: usize| {
        let node = policy.mu1_marginal[i].node;
        policy.eta1.row(node).expect("μ1 support nodes carry kernel rows")
    };
    let actions = match &problem.gen_b {
        GeneratorB::Jump { displacement } => {
            let mut clusters = Vec::new();
            for g in &groups {
                let (bottom, top) = (policy.mu1_marginal[g[0]].x, policy.mu1_marginal[*g.last().unwrap()].x);
                let mut mass = 0.0;
                let mut shift = 0.0;
                for &i in g {
                    let m = policy.mu1_marginal[i];
                    mass += m.mass;
                    shift += row1(i).controls.iter().map(|&(u, p)| m.mass * p * displacement.eval(m.x, u)).sum::<f64>();
                }
                summaries.push(ActionCluster { bottom, top, mass, direction: shift / mass });
                clusters.push(JumpCluster {
                    bottom,
                    top,
                    upward: shift >= 0.0,
                    first_node: policy.mu1_marginal[g[0]].node,
                    samplers: g.iter().map(|&i| Sampler::new(row1(i))).collect(),
                });
            }
            clusters.sort_by(|a, b| a.bottom.total_cmp(&b.bottom));
            Actions::Jumps(clusters)
        }
        GeneratorB::Gradient { direction } => {
            let mut lower: Option<Barrier> = None;
            let mut upper: Option<Barrier> = None;
            for g in &groups {
                let (bottom, top) = (policy.mu1_marginal[g[0]].x, policy.mu1_marginal[*g.last().unwrap()].x);
                let mut mass = 0.0;
                let mut push = 0.0;
                // Heaviest (x, u) atom pushing in the cluster's direction.
                let mut atoms: Vec<(f64, f64, f64)> = Vec::new();
                for &i in g {
                    let m = policy.mu1_marginal[i];
                    mass += m.mass;
                    for &(u, p) in &row1(i).controls {
                        let gamma = direction.eval(m.x, u);
                        push += m.mass * p * gamma;
                        atoms.push((u, m.mass * p, gamma));
                    }
                }
                let sign = push.signum();
                summaries.push(ActionCluster { bottom, top, mass, direction: push / mass });
                if push == 0.0 {
                    continue;
                }
                let (u, _, gamma) = atoms
                    .into_iter()
                    .filter(|a| a.2 * sign > 0.0)
                    .fold((f64::NAN, -1.0, 0.0), |best, a| if a.1 > best.1 { a } else { best });
                if sign > 0.0 {
                    if lower.as_ref().is_none_or(|b| top > b.level) {
                        lower = Some(Barrier { level: top, u, direction: gamma });
                    }
                } else if upper.as_ref().is_none_or(|b| bottom < b.level) {
                    upper = Some(Barrier { level: bottom, u, direction: gamma });
                }
            }
            if let (Some(l), Some(u)) = (&lower, &upper) {
                if l.level >= u.level {
                    return Err(VerifyError::Policy(format!(
                        "reflection barriers cross: lower {} ≥ upper {}",
                        l.level, u.level
                    )));
                }
            }
            Actions::Reflection { lower, upper }
        }
    };

    let horizon = cfg.effective_horizon(problem);
    let n_steps = (horizon / cfg.dt).round() as usize;
    let burn_steps = match problem.criterion {
        Criterion::LongTermAverage => (cfg.burn_in / cfg.dt).round() as usize,
        Criterion::Discounted { .. } => 0,
    };
    Ok((
        Plan {
            problem,
            probes,
            index,
            control,
            bridged,
            start,
            actions,
            alpha: problem.criterion.alpha(),
            n_steps,
            burn_steps,
            dt: cfg.dt,
            enforce: cfg.enforce_budget,
        },
        summaries,
    ))
}

struct PathOutcome {
    cost: f64,
    budgets: Vec<f64>,
    martingale: Vec<f64>,
    occupation: Vec<u32>,
    truncations: u64,
    bridged: u64,
    actions: u64,
    exhausted: bool,
}

fn generator_value(problem: &ProblemSpec, f: &BasisFunction, x: f64, u: f64) -> f64 {
    if f.is_constant() {
        return 0.0;
    }
    let b = problem.gen_a.drift.eval(x, u);
    let s = problem.gen_a.diffusion.eval(x, u);
    0.5 * s * s * f.d2(x) + b * f.d1(x)
}

impl Plan<'_> {
    fn run_path(&self, path: usize, seed: u64) -> PathOutcome {
        let problem = self.problem;
        let costs = &problem.costs;
        let (x_lo, x_hi) = (problem.state.x_lo, problem.state.x_hi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        let mut x = self.start.0[self.start.1.sample(&mut rng)];
        let x_start = x;
        let n_budgets = costs.budgets.len();
        let n_probes = self.probes.len();

        let mut cost = CompensatedSum::default();
        let mut budgets = vec![CompensatedSum::default(); n_budgets];
        let mut drift_terms = vec![CompensatedSum::default(); n_probes];
        let mut singular_terms = vec![CompensatedSum::default(); n_probes];
        let mut occupation = if self.alpha.is_none() { vec![0u32; self.index.last + 1] } else { Vec::new() };
        let mut out = PathOutcome {
            cost: 0.0,
            budgets: Vec::new(),
            martingale: Vec::new(),
            occupation: Vec::new(),
            truncations: 0,
            bridged: 0,
            actions: 0,
            exhausted: false,
        };
        let mut remaining = self.enforce.map(|i| costs.budgets[i].bound);
        let dt = self.dt;
        let sqrt_dt = dt.sqrt();

        for k in 0..self.n_steps {
            let t = k as f64 * dt;
            let (w_start, w_end) = match self.alpha {
                Some(a) => ((-a * t).exp(), (-a * (t + dt)).exp()),
                None => (1.0, 1.0),
            };
            let counted = k >= self.burn_steps;
            let node = self.index.nearest(x);
            if self.bridged[node] {
                out.bridged += 1;
            }
            let u = self.control[node].draw(&mut rng);
            let b = problem.gen_a.drift.eval(x, u);
            let s = problem.gen_a.diffusion.eval(x, u);
            let z: f64 = rng.sample(StandardNormal);
            let x_end = x + b * dt + s * sqrt_dt * z;

            let mut step_cost = 0.5 * dt * (w_start * costs.c0.eval(x, u) + w_end * costs.c0.eval(x_end, u));
            let mut step_budget: Vec<f64> = costs
                .budgets
                .iter()
                .map(|g| 0.5 * dt * (w_start * g.g.eval(x, u) + w_end * g.g.eval(x_end, u)))
                .collect();
            for (acc, f) in drift_terms.iter_mut().zip(self.probes) {
                acc.add(0.5 * dt * (generator_value(problem, f, x, u) + generator_value(problem, f, x_end, u)));
            }

            // Singular action at the end of the step.
            let mut x_after = x_end;
            let mut charge = |x_at: f64, u_at: f64, amount: f64, remaining: &mut Option<f64>| -> f64 {
                let mut amount = amount;
                if let (Some(i), Some(left)) = (self.enforce, remaining.as_mut()) {
                    let rate = w_end * costs.budgets[i].h.eval(x_at, u_at);
                    if rate > 0.0 && rate * amount > *left {
                        amount = *left / rate;
                        *left = 0.0;
                    } else {
                        *left -= rate * amount;
                    }
                }
                step_cost += w_end * costs.c1.eval(x_at, u_at) * amount;
                for (acc, g) in step_budget.iter_mut().zip(&costs.budgets) {
                    *acc += w_end * g.h.eval(x_at, u_at) * amount;
                }
                amount
            };
            let allowed = remaining.is_none_or(|r| r > 0.0);
            match &self.actions {
                Actions::Jumps(clusters) if allowed => {
                    let hit = clusters
                        .iter()
                        .find(|c| c.upward && x_end <= c.top)
                        .or_else(|| clusters.iter().rev().find(|c| !c.upward && x_end >= c.bottom));
                    if let Some(c) = hit {
                        let at = self.index.nearest(x_end).clamp(c.first_node, c.first_node + c.samplers.len() - 1);
                        let u1 = c.samplers[at - c.first_node].draw(&mut rng);
                        let d = match &problem.gen_b {
                            GeneratorB::Jump { displacement } => displacement.eval(x_end, u1),
                            GeneratorB::Gradient { .. } => unreachable!(),
                        };
                        let rate = self.enforce.map_or(0.0, |i| w_end * costs.budgets[i].h.eval(x_end, u1));
                        if remaining.is_none_or(|r| rate <= r) {
                            charge(x_end, u1, 1.0, &mut remaining);
                            x_after = x_end + d;
                            out.actions += 1;
                        } else {
                            remaining = Some(0.0);
                        }
                    }
                }
                Actions::Reflection { lower, upper } if allowed => {
                    let target = match (lower, upper) {
                        (Some(l), _) if x_end < l.level => Some((l, l.level)),
                        (_, Some(h)) if x_end > h.level => Some((h, h.level)),
                        _ => None,
                    };
                    if let Some((barrier, level)) = target {
                        let xi = (level - x_end).abs() / barrier.direction.abs();
                        let used = charge(level, barrier.u, xi, &mut remaining);
                        x_after = x_end + barrier.direction * used;
                        out.actions += 1;
                    }
                }
                _ => {}
            }
            if remaining == Some(0.0) {
                out.exhausted = true;
            }
            for (acc, f) in singular_terms.iter_mut().zip(self.probes) {
                if x_after != x_end {
                    acc.add(f.value(x_after) - f.value(x_end));
                }
            }

            if !(x_lo..=x_hi).contains(&x_after) {
                out.truncations += 1;
                x_after = x_after.clamp(x_lo, x_hi);
            }
            if counted {
                cost.add(step_cost);
                for (acc, v) in budgets.iter_mut().zip(step_budget) {
                    acc.add(v);
                }
                if let Some(slot) = occupation.get_mut(self.index.nearest(x_after)) {
                    *slot += 1;
                }
            }
            x = x_after;
        }

        let per_time = match self.alpha {
            Some(_) => 1.0,
            None => 1.0 / ((self.n_steps - self.burn_steps) as f64 * dt),
        };
        out.cost = cost.value() * per_time;
        out.budgets = budgets.iter().map(|b| b.value() * per_time).collect();
        out.martingale = self
            .probes
            .iter()
            .zip(drift_terms.iter().zip(&singular_terms))
            .map(|(f, (a, s))| {
                if f.is_constant() {
                    0.0
                } else {
                    f.value(x) - f.value(x_start) - a.value() - s.value()
                }
            })
            .collect();
        out.occupation = occupation;
        out
    }
}

fn worker_count(paths: usize) -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(paths).max(1)
}

/// Simulates `policy` on `problem` and estimates its cost, budget spends,
/// the martingale residual of every probe and, for long-term-average runs,
/// the total-variation distance to the policy's `μ0` marginal.
///
/// Paths run in parallel; path `i` draws from stream `i` of `cfg.seed`, and
/// results are aggregated in path order, so reports are reproducible.
pub fn simulate(
    problem: &ProblemSpec,
    policy: &FeedbackPolicy,
    cfg: &SimConfig,
    probes: &[BasisFunction],
) -> Result<VerificationReport, VerifyError> {
    cfg.check(problem)?;
    let (plan, clusters) = build_plan(problem, policy, cfg, probes)?;

    let workers = worker_count(cfg.n_paths);
    let outcomes: Vec<PathOutcome> = if workers == 1 {
        (0..cfg.n_paths).map(|p| plan.run_path(p, cfg.seed)).collect()
    } else {
        let plan = &plan;
        let mut chunks: Vec<Vec<PathOutcome>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| scope.spawn(move || (w..cfg.n_paths).step_by(workers).map(|p| plan.run_path(p, cfg.seed)).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().map(|h| h.join().expect("simulation worker panicked")).collect()
        });
        let mut ordered = Vec::with_capacity(cfg.n_paths);
        let mut iters: Vec<_> = chunks.iter_mut().map(|c| c.drain(..)).collect();
        for p in 0..cfg.n_paths {
            ordered.push(iters[p % workers].next().expect("every path ran"));
        }
        ordered
    };

    let steps = (plan.n_steps * cfg.n_paths) as u64;
    let truncation_events: u64 = outcomes.iter().map(|o| o.truncations).sum();
    if truncation_events as f64 > 0.01 * steps as f64 {
        return Err(VerifyError::Truncation { events: truncation_events, steps });
    }

    let column = |f: &dyn Fn(&PathOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    let horizon = cfg.effective_horizon(problem);
    let tail = |max: f64| plan.alpha.map_or(0.0, |a| max * (-a * horizon).exp() / a);
    let grid_max = |f: &dyn Fn(f64, f64) -> f64| {
        let us = [problem.control.u_lo, 0.5 * (problem.control.u_lo + problem.control.u_hi), problem.control.u_hi];
        policy.state_nodes.iter().flat_map(|&x| us.map(|u| f(x, u).abs())).fold(0.0, f64::max)
    };
    let tail_bound = tail(grid_max(&|x, u| problem.costs.c0.eval(x, u)));
    let cost = Estimate::from_samples("cost", &column(&|o| o.cost)).widened(tail_bound);
    let budgets = problem
        .costs
        .budgets
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let name = if b.name.is_empty() { format!("budget_{i}") } else { format!("budget_{}", b.name) };
            Estimate::from_samples(name, &column(&|o| o.budgets[i])).widened(tail(grid_max(&|x, u| b.g.eval(x, u))))
        })
        .collect();
    let martingale_residuals = probes
        .iter()
        .enumerate()
        .map(|(k, f)| Estimate::from_samples(format!("martingale_{}", f.label()), &column(&|o| o.martingale[k])))
        .collect();

    let stationarity_distance = plan.alpha.is_none().then(|| {
        let mut pooled = vec![0u64; policy.state_nodes.len()];
        for o in &outcomes {
            for (acc, c) in pooled.iter_mut().zip(&o.occupation) {
                *acc += *c as u64;
            }
        }
        let total: u64 = pooled.iter().sum();
        let empirical: Vec<f64> = pooled.iter().map(|c| *c as f64 / total as f64).collect();
        total_variation(&empirical, &policy.mu0_distribution())
    });

    Ok(VerificationReport {
        cost,
        budgets,
        martingale_residuals,
        stationarity_distance,
        horizon,
        tail_bound,
        steps,
        truncation_events,
        bridged_steps: outcomes.iter().map(|o| o.bridged).sum(),
        singular_actions: outcomes.iter().map(|o| o.actions).sum(),
        multi_cluster: clusters.len() > 1,
        clusters,
        exhausted_paths: outcomes.iter().filter(|o| o.exhausted).count(),
    })
}
