use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::GapHistogram;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Non-decreasing, piecewise-linear CDF on `[0, top]` with `F(top) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf<T> {
    breakpoints: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> PiecewiseCdf<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return Err(Error::Validation("cdf needs >= 2 matching breakpoints/values".into()));
        }
        let increasing = breakpoints.windows(2).all(|w| w[0] < w[1]);
        let monotone = values.windows(2).all(|w| w[0] <= w[1]);
        let last = *values.last().unwrap_or(&T::zero());
        if !increasing || !monotone || values[0] < T::zero() || breakpoints[0] < T::zero() {
            return Err(Error::Validation("cdf must be non-decreasing on increasing breakpoints".into()));
        }
        if (last - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::Validation(format!("cdf must end at 1 (got {last})")));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    /// Law of `‖qx‖′` for `x` uniform on `[0, 1]`:
    /// `F(t) = (1/q) Σ_gaps min(2t, g)`.
    pub fn coprime_distance(hist: &GapHistogram) -> Self {
        let q = T::from_u64_lossy(hist.q());
        let mut breakpoints = vec![T::zero()];
        let mut values = vec![T::zero()];
        // covered length below the current gap, and count of larger gaps
        let mut below = 0u64;
        let mut remaining: u64 = hist.total_count();
        for (g, c) in hist.iter() {
            let t = T::from_u64_lossy(g) / T::lit(2.0);
            let covered = below + g * remaining;
            breakpoints.push(t);
            values.push(T::from_u64_lossy(covered) / q);
            below += g * c;
            remaining -= c;
        }
        if let Some(v) = values.last_mut() {
            *v = T::one();
        }
        Self {
            breakpoints,
            values,
        }
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn top(&self) -> T {
        *self.breakpoints.last().unwrap_or(&T::zero())
    }

    pub fn eval(&self, t: T) -> T {
        if t < self.breakpoints[0] {
            return T::zero();
        }
        if t >= self.top() {
            return T::one();
        }
        let i = self.breakpoints.partition_point(|&b| b <= t) - 1;
        let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let (fa, fb) = (self.values[i], self.values[i + 1]);
        fa + (fb - fa) * (t - a) / (b - a)
    }

    /// `(lo, hi, density)` for each linear piece.
    pub fn pieces(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.breakpoints.windows(2).zip(self.values.windows(2)).map(|(b, v)| {
            (b[0], b[1], (v[1] - v[0]) / (b[1] - b[0]))
        })
    }
}

/// Exact `P(‖qx‖′ < t)` at rational `t`.
pub fn coprime_cdf_exact(hist: &GapHistogram, t: &BigRational) -> BigRational {
    if *t <= BigRational::zero() {
        return BigRational::zero();
    }
    let two_t = t * BigRational::from_integer(BigInt::from(2));
    let covered = hist.iter().fold(BigRational::zero(), |acc, (g, c)| {
        let g = BigRational::from_integer(BigInt::from(g));
        let m = if two_t < g { two_t.clone() } else { g };
        acc + m * BigRational::from_integer(BigInt::from(c))
    });
    let out = covered / BigRational::from_integer(BigInt::from(hist.q()));
    if out > BigRational::one() {
        BigRational::one()
    } else {
        out
    }
}
