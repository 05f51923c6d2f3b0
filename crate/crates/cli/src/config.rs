use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use singular_lp::discretize::DiscountedForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Validate,
    Solve,
    Policy,
    Verify,
    BandOracle,
    ExportMps,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    Normalized,
    Rescaled,
}

impl From<Form> for DiscountedForm {
    fn from(f: Form) -> Self {
        match f {
            Form::Normalized => DiscountedForm::Normalized,
            Form::Rescaled => DiscountedForm::Rescaled,
        }
    }
}

/// Inclusive `lo:hi:step` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.lo + self.step * i as f64).collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(format!("expected lo:hi:step, got `{s}`"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let r = Range { lo: num(lo)?, hi: num(hi)?, step: num(step)? };
        if !(r.step > 0.0) || !(r.hi >= r.lo) || !r.lo.is_finite() || !r.hi.is_finite() {
            return Err(format!("`{s}` is not an increasing range with a positive step"));
        }
        Ok(r)
    }
}

/// One batch run. Every report embeds this struct verbatim.
#[derive(Debug, Clone, PartialEq, Parser, Serialize)]
#[command(name = "singular-lp", version, about = "Singular stochastic control through occupation-measure LPs")]
pub struct RunConfig {
    /// Problem file (TOML) or a built-in name: `inventory`, `finite-fuel`.
    #[arg(long)]
    pub problem: String,
    #[arg(long, value_enum, default_value = "report")]
    pub mode: Mode,
    #[arg(long, default_value_t = 101)]
    pub n_state: usize,
    #[arg(long, default_value_t = 41)]
    pub n_control: usize,
    /// Number of uniform cubic splines. Without it, one spline per grid cell.
    #[arg(long)]
    pub basis: Option<usize>,
    /// Discount rate. Turns the built-in inventory problem into its
    /// discounted variant started at `x0 = 1`.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "normalized")]
    pub form: Form,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Simulated time of long-term-average runs.
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10.0)]
    pub burn_in: f64,
    /// Spline probes in the martingale check, besides the constant.
    #[arg(long, default_value_t = 9)]
    pub probes: usize,
    /// Cap this budget's discounted spend on every simulated path.
    #[arg(long)]
    pub enforce_budget: Option<usize>,
    /// Reorder levels `s` searched by the band oracle.
    #[arg(long, default_value = "-1.6:-0.6:0.1")]
    pub s_grid: Range,
    /// Order-up-to levels `S` searched by the band oracle.
    #[arg(long, default_value = "0.4:1.3:0.1")]
    pub big_s_grid: Range,
    #[arg(long, default_value_t = 3000)]
    pub cycles: usize,
    #[arg(long, default_value_t = 0.01)]
    pub band_dt: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl RunConfig {
    /// Defaults for everything but the problem and mode.
    pub fn new(problem: impl Into<String>, mode: Mode, out: impl Into<PathBuf>) -> Self {
        let mode_name = mode.to_possible_value().expect("no skipped modes").get_name().to_string();
        let mut cfg = RunConfig::parse_from(["singular-lp", "--problem", "_", "--mode", &mode_name]);
        cfg.problem = problem.into();
        cfg.out = out.into();
        cfg
    }
}
