//! Scalar traits shared by the numeric kernels.
//!
//! Floating code is written against [`Real`] (implemented for `f32` and
//! `f64`); code that must decide exact equalities (fiber triviality, exact
//! interval sweeps) is written against [`Exact`] or [`Coord`].

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    fn from_u64_lossy(v: u64) -> Self {
        Self::from_u64(v).unwrap_or_else(Self::infinity)
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field with exact arithmetic (rationals).
pub trait Exact: Num + Clone + PartialOrd + Debug + Display + Send + Sync {}

impl Exact for BigRational {}
impl Exact for Ratio<i64> {}
impl Exact for Ratio<i128> {}

/// Endpoint type for interval sweeps: either a float with a merge slack or
/// an exact rational with none.
pub trait Coord: Num + Clone + PartialOrd + Debug + Send + Sync {
    /// Gaps no larger than this are merged during normalization.
    fn merge_slack() -> Self;
    fn to_f64_lossy(&self) -> f64;
}

impl Coord for f64 {
    fn merge_slack() -> Self {
        1e-15
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Coord for BigRational {
    fn merge_slack() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Exact rational value of a finite double (every finite double is dyadic).
pub fn exact_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}
