//! Measure values with provenance and confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Below this many hits the normal approximation is replaced by exact
/// Clopper–Pearson bounds.
pub const EXACT_CI_HIT_THRESHOLD: u64 = 30;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    ClosedForm,
    /// Numerical quadrature with an absolute error bound.
    NumericExact { err: f64 },
    MonteCarlo {
        samples: u64,
        hits: u64,
        ci_low: f64,
        ci_high: f64,
        seed: u64,
        generator: String,
    },
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::ClosedForm => "closed-form",
            Provenance::NumericExact { .. } => "numeric-exact",
            Provenance::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub provenance: Provenance,
}

impl MeasureEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::Exact,
        }
    }

    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            provenance: Provenance::ClosedForm,
        }
    }

    pub fn numeric(value: f64, err: f64) -> Self {
        Self {
            value,
            provenance: Provenance::NumericExact { err },
        }
    }

    /// Hit-fraction estimate with a 95% interval.
    ///
    /// `certain_empty` marks runs where no point can be a hit (ψ vanishes on
    /// the whole range); the interval then collapses to `[0, 0]`.
    pub fn monte_carlo(hits: u64, samples: u64, seed: u64, generator: &str, certain_empty: bool) -> Self {
        let (ci_low, ci_high) = if certain_empty {
            (0.0, 0.0)
        } else {
            confidence_interval(hits, samples)
        };
        let value = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        Self {
            value,
            provenance: Provenance::MonteCarlo {
                samples,
                hits,
                ci_low,
                ci_high,
                seed,
                generator: generator.to_string(),
            },
        }
    }

    /// `(low, high)` for Monte Carlo values, `(v, v)` otherwise.
    pub fn interval(&self) -> (f64, f64) {
        match &self.provenance {
            Provenance::MonteCarlo { ci_low, ci_high, .. } => (*ci_low, *ci_high),
            Provenance::NumericExact { err } => {
                ((self.value - err).max(0.0), (self.value + err).min(1.0))
            }
            _ => (self.value, self.value),
        }
    }

    pub fn ci_width(&self) -> f64 {
        let (lo, hi) = self.interval();
        hi - lo
    }

    /// Standard error of a hit fraction; 0 for non-random provenance.
    pub fn std_error(&self) -> f64 {
        match &self.provenance {
            Provenance::MonteCarlo { samples, .. } if *samples > 0 => {
                (self.value * (1.0 - self.value) / *samples as f64).sqrt()
            }
            _ => 0.0,
        }
    }
}

/// 95% interval for a binomial proportion: normal approximation, or
/// Clopper–Pearson when `hits < 30` (or when too few misses for the normal
/// approximation on the other side).
pub fn confidence_interval(hits: u64, samples: u64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let misses = samples - hits;
    if hits < EXACT_CI_HIT_THRESHOLD || misses < EXACT_CI_HIT_THRESHOLD {
        return clopper_pearson(hits, samples);
    }
    let p = hits as f64 / samples as f64;
    let half = Z_95 * (p * (1.0 - p) / samples as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

pub fn clopper_pearson(hits: u64, samples: u64) -> (f64, f64) {
    let alpha = 0.05;
    let k = hits as f64;
    let n = samples as f64;
    let low = if hits == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .map(|b| b.inverse_cdf(alpha / 2.0))
            .unwrap_or(0.0)
    };
    let high = if hits == samples {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .map(|b| b.inverse_cdf(1.0 - alpha / 2.0))
            .unwrap_or(1.0)
    };
    (low, high)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_contains_value_and_shrinks() {
        let mut prev = f64::INFINITY;
        for n in [100u64, 1_000, 10_000, 100_000] {
            let e = MeasureEstimate::monte_carlo(n * 3 / 10, n, 1, "g", false);
            let (lo, hi) = e.interval();
            assert!(lo <= e.value && e.value <= hi);
            assert!(hi - lo < prev);
            prev = hi - lo;
        }
    }

    #[test]
    fn exact_bounds_for_rare_hits() {
        let (lo, hi) = confidence_interval(0, 100);
        assert_eq!(lo, 0.0);
        // 1 - 0.025^(1/100)
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-9);
        let (lo, hi) = confidence_interval(5, 1000);
        assert!(lo > 0.0 && lo < 0.005 && hi > 0.005);
        let (lo, hi) = confidence_interval(1000, 1000);
        assert!(lo < 1.0 && hi == 1.0);
    }

    #[test]
    fn certain_empty_collapses() {
        let e = MeasureEstimate::monte_carlo(0, 500, 7, "g", true);
        assert_eq!(e.interval(), (0.0, 0.0));
        assert_eq!(e.value, 0.0);
    }
}
