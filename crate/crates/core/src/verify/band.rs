//! Renewal-reward evaluation of `(s, S)` band policies for inventory-shaped
//! problems, and a brute-force search over bands.
//!
//! A cycle starts at `S` and runs the drifted Brownian motion until it first
//! reaches `s`, where an order of size `S − s` is placed. Increments are
//! exact; a step that ends above `s` still counts as a hit with the Brownian
//! bridge crossing probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use super::{SimConfig, VerifyError};
use crate::model::{GeneratorB, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPolicy {
    /// Reorder trigger.
    pub s: f64,
    /// Order-up-to level.
    #[serde(rename = "S")]
    pub big_s: f64,
}

impl BandPolicy {
    pub fn new(s: f64, big_s: f64) -> Self {
        BandPolicy { s, big_s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEstimate {
    pub band: BandPolicy,
    /// Long-run average cost.
    pub cost: Estimate,
    pub cycle_length: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSearch {
    pub best: BandEstimate,
    /// Every evaluated pair in lexicographic `(s, S)` order.
    pub table: Vec<BandEstimate>,
}

struct Dynamics {
    speed: f64,
    sigma: f64,
}

fn band_dynamics(problem: &ProblemSpec) -> Result<Dynamics, VerifyError> {
    let not_band = |what: &str| Err(VerifyError::NotBandShape(what.to_string()));
    let GeneratorB::Jump { displacement } = &problem.gen_b else {
        return not_band("singular generator is not a jump");
    };
    let (lo, hi) = (problem.state.x_lo, problem.state.x_hi);
    let (ulo, uhi) = (problem.control.u_lo, problem.control.u_hi);
    for i in 0..=4 {
        for j in 0..=4 {
            let x = lo + (hi - lo) * i as f64 / 4.0;
            let u = ulo + (uhi - ulo) * j as f64 / 4.0;
            if (displacement.eval(x, u) - u).abs() > 1e-12 * (1.0 + u.abs()) {
                return not_band("jump size is not the control");
            }
        }
    }
    let Some(drift) = problem.gen_a.drift.constant_value() else {
        return not_band("drift is not constant");
    };
    let Some(sigma) = problem.gen_a.diffusion.constant_value() else {
        return not_band("diffusion is not constant");
    };
    if drift >= 0.0 {
        return Err(VerifyError::NonNegativeDemand(-drift));
    }
    Ok(Dynamics { speed: -drift, sigma: sigma.abs() })
}

/// Long-run average cost of ordering up to `S` whenever the level falls to
/// `s`, from `cfg.n_paths` independent cycles of step `cfg.dt`. Cycle `i`
/// uses random stream `i` of `cfg.seed`, so different bands see common
/// random numbers.
pub fn band_policy_oracle(problem: &ProblemSpec, band: BandPolicy, cfg: &SimConfig) -> Result<BandEstimate, VerifyError> {
    let dynamics = band_dynamics(problem)?;
    if !(band.s < band.big_s) || !problem.state.contains(band.s) || !problem.state.contains(band.big_s) {
        return Err(VerifyError::Config(format!("band ({}, {}) is not an ordered pair inside the state interval", band.s, band.big_s)));
    }
    if cfg.n_paths < 2 || !(cfg.dt > 0.0) {
        return Err(VerifyError::Config("band oracle needs dt > 0 and at least 2 cycles".into()));
    }
    let c0 = &problem.costs.c0;
    let u0 = problem.control.u_lo;
    let order_cost = problem.costs.c1.eval(band.s, band.big_s - band.s);
    let (dt, s) = (cfg.dt, band.s);
    let drift_step = -dynamics.speed * dt;
    let noise = dynamics.sigma * dt.sqrt();
    let bridge_scale = 2.0 / (dynamics.sigma * dynamics.sigma * dt);

    let mut costs = Vec::with_capacity(cfg.n_paths);
    let mut lengths = Vec::with_capacity(cfg.n_paths);
    for cycle in 0..cfg.n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cycle as u64);
        let mut x = band.big_s;
        let mut fx = c0.eval(x, u0);
        let mut time = 0.0;
        let mut cost = 0.0;
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let next = x + drift_step + noise * z;
            let crossing = rng.random::<f64>();
            if next <= s {
                let fraction = (x - s) / (x - next);
                time += fraction * dt;
                cost += 0.5 * fraction * dt * (fx + c0.eval(s, u0));
                break;
            }
            if dynamics.sigma > 0.0 && crossing < (-bridge_scale * (x - s) * (next - s)).exp() {
                time += 0.5 * dt;
                cost += 0.25 * dt * (fx + c0.eval(s, u0));
                break;
            }
            let f_next = c0.eval(next, u0);
            time += dt;
            cost += 0.5 * dt * (fx + f_next);
            x = next;
            fx = f_next;
        }
        costs.push(cost + order_cost);
        lengths.push(time);
    }
    Ok(BandEstimate {
        band,
        cost: Estimate::ratio("cost", &costs, &lengths),
        cycle_length: Estimate::from_samples("cycle_length", &lengths),
    })
}

/// Evaluates every `s < S` pair from the two grids and returns the lowest
/// average cost. Ties keep the lexicographically smallest `(s, S)`.
pub fn band_search(problem: &ProblemSpec, s_grid: &[f64], big_s_grid: &[f64], cfg: &SimConfig) -> Result<BandSearch, VerifyError> {
    let mut pairs: Vec<(f64, f64)> =
        s_grid.iter().flat_map(|&s| big_s_grid.iter().map(move |&b| (s, b))).filter(|(s, b)| s < b).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.dedup();
    if pairs.is_empty() {
        return Err(VerifyError::EmptyPairs);
    }
    let mut table = Vec::with_capacity(pairs.len());
    for (s, b) in pairs {
        table.push(band_policy_oracle(problem, BandPolicy::new(s, b), cfg)?);
    }
    let best = table
        .iter()
        .fold(None::<&BandEstimate>, |best, e| match best {
            Some(b) if b.cost.mean <= e.cost.mean => Some(b),
            _ => Some(e),
        })
        .cloned()
        .expect("non-empty table");
    Ok(BandSearch { best, table })
}
