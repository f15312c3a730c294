//! Exact and Monte Carlo laboratory for metric multiplicative Diophantine
//! approximation.
//!
//! The crate computes measures of the approximation domains
//! `{x : ∏ ‖q x_i‖ < ψ(q)}` (and their coprime and max-norm variants),
//! estimates measures of their truncated unions, evaluates the divergence
//! sums attached to `ψ`, implements the divergence Borel–Cantelli lower
//! bound, and checks the cross fibering principle exactly on finite
//! probability spaces.

pub mod arith;
pub mod borel_cantelli;
pub mod config;
pub mod error;
pub mod estimate;
pub mod fibering;
pub mod harness;
pub mod psi;
pub mod regions;
pub mod report;
pub mod sampler;
pub mod scalar;

pub use error::{Error, Result};
pub use estimate::{MeasureEstimate, Provenance};
pub use psi::{ApproxFunction, CriterionKind, SumCriterion, Verdict};
pub use regions::{Mode, RegionSpec};
pub use sampler::ExperimentConfig;

use num_rational::BigRational;

/// Floating interval sweeps.
pub type IntervalUnionF64 = regions::IntervalUnion<f64>;
/// Exact interval sweeps over rational endpoints.
pub type ExactIntervalUnion = regions::IntervalUnion<BigRational>;
pub type PiecewiseCdfF64 = regions::PiecewiseCdf<f64>;
pub type PiecewiseCdfF32 = regions::PiecewiseCdf<f32>;
/// Event statistics in double precision.
pub type EventStatsF64 = borel_cantelli::EventStats<f64>;
/// Finite probability space with exact rational weights.
pub type RationalSpace = fibering::DiscreteSpace<BigRational>;
pub type RationalProductSet = fibering::ProductSet<BigRational>;
