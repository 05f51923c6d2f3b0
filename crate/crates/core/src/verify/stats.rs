//! Compensated sums and across-sample confidence intervals.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Neumaier summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut s = CompensatedSum::default();
    values.into_iter().for_each(|v| s.add(*v));
    s.value()
}

/// A mean with its 95% half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub mean: f64,
    pub half_width: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Sample mean and normal-theory interval. A single sample gets an
    /// infinite half-width.
    pub fn from_samples(name: impl Into<String>, samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = if n == 0 { f64::NAN } else { compensated_sum(samples) / n as f64 };
        let std_error = if n < 2 {
            f64::INFINITY
        } else {
            let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (compensated_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        };
        Estimate { name: name.into(), mean, half_width: Z95 * std_error, std_error, n }
    }

    /// Ratio `Σ numerators / Σ denominators` with the delta-method interval
    /// used for regenerative cycles.
    pub fn ratio(name: impl Into<String>, numerators: &[f64], denominators: &[f64]) -> Self {
        let n = numerators.len();
        let mean_den = compensated_sum(denominators) / n as f64;
        let ratio = compensated_sum(numerators) / compensated_sum(denominators);
        let residuals: Vec<f64> = numerators.iter().zip(denominators).map(|(c, t)| c - ratio * t).collect();
        let spread = Estimate::from_samples("", &residuals);
        let std_error = spread.std_error / mean_den;
        Estimate { name: name.into(), mean: ratio, half_width: Z95 * std_error, std_error, n }
    }

    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }

    /// Widens the interval by a deterministic error bound.
    pub fn widened(mut self, bound: f64) -> Self {
        self.half_width += bound;
        self
    }
}

/// Total-variation distance `½ Σ |p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_lost_bits() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(&values), 2.0);
    }

    #[test]
    fn constant_samples_have_zero_width() {
        let e = Estimate::from_samples("c", &[0.3; 17]);
        assert_eq!(e.mean, 0.3);
        assert_eq!(e.half_width, 0.0);
    }

    #[test]
    fn interval_matches_textbook_formula() {
        let e = Estimate::from_samples("x", &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.half_width - Z95 * sd / 2.0).abs() < 1e-15);
        assert!(Estimate::from_samples("one", &[1.0]).half_width.is_infinite());
    }

    #[test]
    fn ratio_of_proportional_samples_is_exact() {
        let e = Estimate::ratio("r", &[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.half_width, 0.0);
    }

    #[test]
    fn total_variation_of_disjoint_masses_is_one() {
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(total_variation(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
    }
}
