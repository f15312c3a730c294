//! Measures of the single-`q` approximation domains and of truncated unions
//! in dimension one.
//!
//! A domain around `p/q` in the hyperbolic form `∏ |x_i - p_i/q| < δ/q^n`
//! is handled as `∏ ‖q x_i‖ < δ` (or with `‖·‖′` for coprime numerators):
//! minimizing each factor over its own `p_i` is exact, so the two
//! descriptions of the union over `p` coincide.

mod cdf;
mod interval;

pub use cdf::{coprime_cdf_exact, PiecewiseCdf};
pub use interval::IntervalUnion;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::arith::{GapHistogram, PhiTable};
use crate::error::{Error, Result};
use crate::estimate::MeasureEstimate;
use crate::psi::ApproxFunction;
use crate::scalar::{exact_from_f64, Coord, Real};

/// Default absolute tolerance for product-measure quadrature.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Maximum number of candidate intervals a 1-D truncated union may build.
pub const DEFAULT_INTERVAL_BUDGET: u128 = 50_000_000;

const MAX_SIMPSON_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `∏ ‖q x_i‖ < ψ(q)` (hyperbolic domains).
    Product,
    /// `(max ‖q x_i‖)^n < ψ(q)` (cubical domains).
    Max,
}

/// One `q`-slice of an approximation domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub q: u64,
    pub n: u32,
    pub delta: f64,
    pub mode: Mode,
    pub coprime: bool,
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Domain("q must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        if !(self.delta >= 0.0) || self.delta.is_nan() {
            return Err(Error::Domain(format!("delta must be >= 0 (got {})", self.delta)));
        }
        Ok(())
    }
}

/// Radius-`δ/q` intervals around the fractions `p/q` (coprime ones if asked),
/// clipped to `[0, 1]`. Numerators outside `[0, q]` are included when `δ`
/// is large enough for their intervals to reach the unit interval.
pub fn slice_intervals_1d(q: u64, delta: f64, coprime: bool) -> IntervalUnion<f64> {
    let qf = q as f64;
    let r = delta / qf;
    let reach = delta.ceil() as i64;
    IntervalUnion::from_intervals(
        (-reach..=q as i64 + reach)
            .filter(|p| !coprime || p.unsigned_abs().gcd(&q) == 1)
            .map(|p| {
                let c = p as f64 / qf;
                (c - r, c + r)
            }),
    )
}

fn exact_slice_intervals(q: u64, delta: &BigRational, coprime: bool) -> Vec<(BigRational, BigRational)> {
    let qb = BigRational::from_integer(BigInt::from(q));
    let r = delta / &qb;
    let reach = delta.ceil().to_integer();
    let reach: i64 = reach.try_into().unwrap_or(i64::MAX / 4);
    (-reach..=q as i64 + reach)
        .filter(|p| !coprime || p.unsigned_abs().gcd(&q) == 1)
        .map(|p| {
            let c = BigRational::from_integer(BigInt::from(p)) / &qb;
            (&c - &r, c + &r)
        })
        .collect()
}

/// Exact measure of a one-dimensional slice.
pub fn region_measure_1d(spec: &RegionSpec) -> Result<MeasureEstimate> {
    spec.validate()?;
    if spec.n != 1 {
        return Err(Error::Domain(format!("region_measure_1d needs n = 1 (got {})", spec.n)));
    }
    let d = spec.delta;
    if d == 0.0 {
        return Ok(MeasureEstimate::exact(0.0));
    }
    if !spec.coprime {
        return Ok(MeasureEstimate::exact((2.0 * d).min(1.0)));
    }
    if d < 0.5 {
        let phi = crate::arith::euler_phi(spec.q)?;
        return Ok(MeasureEstimate::exact(2.0 * d * phi as f64 / spec.q as f64));
    }
    Ok(MeasureEstimate::exact(
        slice_intervals_1d(spec.q, d, true).measure(),
    ))
}

/// `F_n(t) = t Σ_{k<n} ln(1/t)^k / k!`, the law of a product of `n`
/// independent uniforms on `[0, 1]`.
pub fn uniform_product_cdf<T: Real>(n: u32, t: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let l = -t.ln();
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..n {
        term = term * l / T::from_u32(k).unwrap_or_else(T::one);
        sum = sum + term;
    }
    (t * sum).min(T::one())
}

/// `|{x ∈ [0,1]^n : ∏ ‖q x_i‖ < δ}| = F_n(2^n δ)`, for every `q`.
pub fn product_measure_plain<T: Real>(n: u32, delta: T) -> T {
    let scale = T::lit(2.0).powi(n as i32);
    uniform_product_cdf(n, scale * delta)
}

pub fn product_region_measure_plain(n: u32, delta: f64) -> Result<MeasureEstimate> {
    if n == 0 || !(delta >= 0.0) {
        return Err(Error::Domain("need n >= 1 and delta >= 0".into()));
    }
    Ok(MeasureEstimate::closed_form(product_measure_plain(n, delta)))
}

pub fn coprime_dist_cdf(q: u64) -> Result<PiecewiseCdf<f64>> {
    Ok(PiecewiseCdf::coprime_distance(&GapHistogram::new(q)?))
}

/// `P(D_1 ⋯ D_n < δ)` for `D_i` i.i.d. with law `law`, with its error bound.
///
/// `G_1 = F` and `G_k(u) = ∫ G_{k-1}(u/t) dF(t)`. The `k = 2` level is
/// integrated in closed form panel by panel (the integrand is `a + b·u/t`
/// between kinks); deeper levels use adaptive Simpson in `ln t`.
pub fn product_cdf(law: &PiecewiseCdf<f64>, n: u32, delta: f64, tol: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be > 0".into()));
    }
    let (v, e, ok) = level(law, n, delta, tol);
    if !ok {
        return Err(Error::ConvergenceFailure {
            low: (v - e).max(0.0),
            high: (v + e).min(1.0),
            tol,
        });
    }
    Ok((v.clamp(0.0, 1.0), e))
}

fn level(law: &PiecewiseCdf<f64>, k: u32, u: f64, tol: f64) -> (f64, f64, bool) {
    if u <= 0.0 {
        return (0.0, 0.0, true);
    }
    match k {
        1 => (law.eval(u), 0.0, true),
        2 => (level_two(law, u), 0.0, true),
        _ => level_deep(law, k, u, tol),
    }
}

fn level_two(law: &PiecewiseCdf<f64>, u: f64) -> f64 {
    let top = law.top();
    let bps = law.breakpoints();
    let mut cuts: Vec<f64> = bps.to_vec();
    cuts.extend(bps.iter().filter(|&&c| c > 0.0).map(|&c| u / c));
    cuts.retain(|&t| t >= 0.0 && t <= top);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let density = piece_density(law, mid);
        if density == 0.0 {
            continue;
        }
        let v = u / mid;
        if v >= top {
            total += density * (hi - lo);
            continue;
        }
        let i = bps.partition_point(|&b| b <= v) - 1;
        let (c0, c1) = (bps[i], bps[i + 1]);
        let (f0, f1) = (law.values()[i], law.values()[i + 1]);
        let slope = (f1 - f0) / (c1 - c0);
        total += density * ((f0 - slope * c0) * (hi - lo) + slope * u * (hi / lo).ln());
    }
    total
}

fn piece_density(law: &PiecewiseCdf<f64>, t: f64) -> f64 {
    let bps = law.breakpoints();
    if t < bps[0] || t >= law.top() {
        return 0.0;
    }
    let i = bps.partition_point(|&b| b <= t) - 1;
    (law.values()[i + 1] - law.values()[i]) / (bps[i + 1] - bps[i])
}

fn level_deep(law: &PiecewiseCdf<f64>, k: u32, u: f64, tol: f64) -> (f64, f64, bool) {
    let top = law.top();
    // below t_min the inner factor is identically 1
    let t_min = u / top.powi(k as i32 - 1);
    let inner_tol = tol / 2.0;
    let pieces: Vec<(f64, f64, f64)> = law.pieces().collect();
    let piece_tol = tol / 2.0 / pieces.len().max(1) as f64;
    let (mut total, mut err, mut ok) = (0.0, 0.0, true);
    for (a, b, density) in pieces {
        if density == 0.0 {
            continue;
        }
        let mut lo = a;
        if t_min > lo {
            let flat_hi = t_min.min(b);
            total += density * (flat_hi - lo);
            lo = flat_hi;
        }
        if lo >= b {
            continue;
        }
        // ∫_{lo}^{b} G(u/t) dt = ∫ G(u e^{-s}) e^{s} ds over s = ln t
        let g = |s: f64| {
            let t = s.exp();
            let (v, e, good) = level(law, k - 1, u / t, inner_tol);
            (v * t, e * t, good)
        };
        let (s0, s1) = (lo.ln(), b.ln());
        let (v, e, good) = adaptive_simpson(&g, s0, s1, piece_tol / density);
        total += density * v;
        err += density * e;
        ok &= good;
    }
    (total, err + inner_tol, ok)
}

fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64, bool)
where
    F: Fn(f64) -> (f64, f64, bool),
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa.0 + 4.0 * fm.0 + fb.0);
    let ok = fa.2 && fb.2 && fm.2;
    let (v, e, good) = simpson_step(f, a, b, fa.0, fm.0, fb.0, whole, tol, MAX_SIMPSON_DEPTH);
    (v, e, ok && good)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> (f64, f64, bool)
where
    F: Fn(f64) -> (f64, f64, bool),
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, _, g1) = f(lm);
    let (frm, _, g2) = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let est = delta.abs() / 15.0;
    if est <= tol {
        return (left + right + delta / 15.0, est, g1 && g2);
    }
    if depth == 0 {
        return (left + right + delta / 15.0, est, false);
    }
    let (lv, le, lok) = simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1);
    let (rv, re, rok) = simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
    (lv + rv, le + re, lok && rok && g1 && g2)
}

/// `|H(ψ, q)|` for the coprime multiplicative domain: `P(∏ D_i < δ)` with
/// `D_i` i.i.d. distributed as `‖qx‖′`.
pub fn product_region_measure_coprime(q: u64, n: u32, delta: f64, tol: f64) -> Result<MeasureEstimate> {
    let law = coprime_dist_cdf(q)?;
    product_measure_with_law(&law, n, delta, tol)
}

pub fn product_measure_with_law(law: &PiecewiseCdf<f64>, n: u32, delta: f64, tol: f64) -> Result<MeasureEstimate> {
    if !(delta >= 0.0) {
        return Err(Error::Domain("delta must be >= 0".into()));
    }
    let (v, e) = product_cdf(law, n, delta, tol)?;
    Ok(MeasureEstimate::numeric(v, e))
}

/// Cubical domain `(max ‖q x_i‖)^n < δ`: each coordinate independently
/// below `δ^(1/n)`.
pub fn max_region_measure(q: u64, n: u32, delta: f64, coprime: bool) -> Result<MeasureEstimate> {
    if n == 0 || q == 0 || !(delta >= 0.0) {
        return Err(Error::Domain("need q, n >= 1 and delta >= 0".into()));
    }
    let t = delta.powf(1.0 / n as f64);
    let per = if coprime {
        coprime_dist_cdf(q)?.eval(t)
    } else {
        (2.0 * t).min(1.0)
    };
    Ok(MeasureEstimate::closed_form(per.powi(n as i32)))
}

/// Dispatch to the right exact or closed-form measure for a slice.
pub fn region_measure(spec: &RegionSpec, tol: f64) -> Result<MeasureEstimate> {
    spec.validate()?;
    if spec.n == 1 {
        return region_measure_1d(spec);
    }
    match (spec.mode, spec.coprime) {
        (Mode::Product, false) => product_region_measure_plain(spec.n, spec.delta),
        (Mode::Product, true) => product_region_measure_coprime(spec.q, spec.n, spec.delta, tol),
        (Mode::Max, c) => max_region_measure(spec.q, spec.n, spec.delta, c),
    }
}

fn candidate_count(f: &ApproxFunction, q0: u64, q1: u64) -> u128 {
    (q0..=q1)
        .map(|q| {
            let d = f.value(q);
            if d > 0.0 && d.is_finite() {
                q as u128 + 1 + 2 * d.ceil() as u128
            } else {
                0
            }
        })
        .sum()
}

/// Exact `|⋃_{Q0 ≤ q ≤ Q} H(ψ, q)|` in dimension one.
///
/// Table families are swept with exact rational endpoints; other families
/// use doubles with a `1e-15` merge slack.
pub fn truncated_union_1d(f: &ApproxFunction, q0: u64, q1: u64, coprime: bool) -> Result<MeasureEstimate> {
    truncated_union_1d_with_budget(f, q0, q1, coprime, DEFAULT_INTERVAL_BUDGET)
}

pub fn truncated_union_1d_with_budget(
    f: &ApproxFunction,
    q0: u64,
    q1: u64,
    coprime: bool,
    budget: u128,
) -> Result<MeasureEstimate> {
    if q0 == 0 || q0 > q1 {
        return Err(Error::Domain(format!("need 1 <= Q0 <= Q (got {q0}, {q1})")));
    }
    if let Some(q) = (q0..=q1).find(|&q| f.value(q).is_infinite()) {
        return Err(Error::Overflow { q });
    }
    let needed = candidate_count(f, q0, q1);
    if needed > budget {
        return Err(Error::Resource {
            what: "1-D interval sweep",
            needed,
            budget,
        });
    }
    if f.is_table() {
        let mut raw = Vec::new();
        for q in q0..=q1 {
            let d = f.value(q);
            if d > 0.0 {
                let d = exact_from_f64(d).ok_or_else(|| Error::Domain("non-finite table value".into()))?;
                raw.extend(exact_slice_intervals(q, &d, coprime));
            }
        }
        let u = IntervalUnion::<BigRational>::from_intervals(raw);
        return Ok(MeasureEstimate::exact(u.measure().to_f64_lossy()));
    }
    Ok(MeasureEstimate::exact(union_1d_f64(f, q0, q1, coprime).measure()))
}

pub(crate) fn union_1d_f64(f: &ApproxFunction, q0: u64, q1: u64, coprime: bool) -> IntervalUnion<f64> {
    let mut raw = Vec::new();
    for q in q0..=q1 {
        let d = f.value(q);
        if d > 0.0 {
            let qf = q as f64;
            let r = d / qf;
            let reach = d.ceil() as i64;
            raw.extend(
                (-reach..=q as i64 + reach)
                    .filter(|p| !coprime || p.unsigned_abs().gcd(&q) == 1)
                    .map(|p| (p as f64 / qf - r, p as f64 / qf + r)),
            );
        }
    }
    IntervalUnion::from_intervals(raw)
}

/// Exact single-slice measures `|H(ψ, q)|` for `q` in `q0..=q1`, sharing
/// one totient table. Used for tail sums and Borel–Cantelli singles.
pub fn slice_measures(
    f: &ApproxFunction,
    q0: u64,
    q1: u64,
    n: u32,
    mode: Mode,
    coprime: bool,
    tol: f64,
) -> Result<Vec<MeasureEstimate>> {
    if q0 == 0 || q0 > q1 {
        return Err(Error::Domain(format!("need 1 <= Q0 <= Q (got {q0}, {q1})")));
    }
    let table = PhiTable::new(q1)?;
    (q0..=q1)
        .map(|q| {
            let delta = f.value(q);
            if delta.is_infinite() {
                return Err(Error::Overflow { q });
            }
            if delta == 0.0 {
                return Ok(MeasureEstimate::exact(0.0));
            }
            if n >= 2 && mode == Mode::Product && coprime {
                let law = PiecewiseCdf::coprime_distance(&GapHistogram::with_table(q, &table)?);
                return product_measure_with_law(&law, n, delta, tol);
            }
            region_measure(
                &RegionSpec {
                    q,
                    n,
                    delta,
                    mode,
                    coprime,
                },
                tol,
            )
        })
        .collect()
}
