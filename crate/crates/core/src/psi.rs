//! Approximating functions `ψ: N -> [0, ∞]` and the divergence-sum criteria
//! attached to them.
//!
//! Logarithms are natural throughout. Families that put a logarithm in the
//! denominator use `ln(q + 1)` so that `q = 1` is finite; the criterion
//! weights `(ln q)^(n-1)` stay literal, so the `q = 1` summand of a
//! log-weighted criterion is 0 for `n >= 2`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::{self, PhiTable};
use crate::error::{Error, Result};

/// Restriction of a base family to a subset of `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support {
    /// Multiples of `m`.
    Multiples { m: u64 },
    /// Multiples of the product of the first `k` primes.
    PrimorialMultiples { k: u32 },
    /// `q` with `φ(q)/q < theta`.
    PhiRatioBelow { theta: f64 },
}

impl Support {
    fn validate(&self) -> Result<()> {
        match *self {
            Support::Multiples { m } if m == 0 => {
                Err(Error::InvalidFamily("support multiples of 0".into()))
            }
            Support::PrimorialMultiples { k } if k > 15 => Err(Error::InvalidFamily(format!(
                "primorial of {k} primes overflows u64"
            ))),
            Support::PhiRatioBelow { theta } if !(theta.is_finite() && theta > 0.0) => Err(
                Error::InvalidFamily(format!("phi ratio threshold {theta} must be positive")),
            ),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, q: u64) -> bool {
        match *self {
            Support::Multiples { m } => q % m == 0,
            Support::PrimorialMultiples { k } => q % primorial(k) == 0,
            Support::PhiRatioBelow { theta } => {
                let phi = arith::euler_phi(q).unwrap_or(q);
                (phi as f64) < theta * q as f64
            }
        }
    }
}

/// Product of the first `k` primes (`primorial(0) = 1`).
pub fn primorial(k: u32) -> u64 {
    let mut out = 1u64;
    let mut found = 0;
    let mut p = 2u64;
    while found < k {
        if arith::is_prime(p) {
            out *= p;
            found += 1;
        }
        p += 1;
    }
    out
}

/// Positive weight `f: (0, ∞) -> (0, ∞)` applied to `|q|_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFn {
    /// `f(t) = t`
    Identity,
    /// `f(t) = t^e`
    Power { e: f64 },
    /// `f(t) = c`, `c > 0`
    Constant { c: f64 },
}

impl WeightFn {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            WeightFn::Identity => t,
            WeightFn::Power { e } => t.powf(e),
            WeightFn::Constant { c } => c,
        }
    }

    fn is_unit(&self) -> bool {
        matches!(*self, WeightFn::Constant { c } if c == 1.0)
            || matches!(*self, WeightFn::Power { e } if e == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `c · q^(-a) · ln(q + 1)^(-b)`
    PowerLog { c: f64, a: f64, b: f64 },
    /// `values[q - 1]`, zero past the end.
    Table { values: Vec<f64> },
    IndicatorSupport { base: Box<Family>, support: Support },
    /// `ψ(q) / ∏ ‖q x_i‖` with `α/0 = +∞` for `α > 0` and `0/0 = 0`.
    Conditional { base: Box<Family>, anchors: Vec<f64> },
    /// `ψ(q) / ∏ f_i(|q|_{p_i})`
    PadicWeighted {
        base: Box<Family>,
        primes: Vec<u64>,
        weights: Vec<WeightFn>,
    },
}

/// What is known analytically about a divergence sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    KnownDivergent,
    KnownConvergent,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::KnownDivergent => "known-divergent",
            Verdict::KnownConvergent => "known-convergent",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// `Σ ψ(q)`
    Plain,
    /// `Σ ψ(q) (ln q)^(n-1)`
    LogWeighted,
    /// `Σ (φ(q)/q)^n ψ(q) (ln q)^(n-1)`
    PhiLogWeighted,
    /// `Σ (φ(q)/q)^n ψ(q)`
    PhiPlain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SumCriterion {
    pub kind: CriterionKind,
    pub n: u32,
}

impl SumCriterion {
    pub fn new(kind: CriterionKind, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("criterion dimension must be >= 1".into()));
        }
        Ok(Self { kind, n })
    }

    fn uses_phi(&self) -> bool {
        matches!(
            self.kind,
            CriterionKind::PhiLogWeighted | CriterionKind::PhiPlain
        )
    }

    fn log_power(&self) -> u32 {
        match self.kind {
            CriterionKind::LogWeighted | CriterionKind::PhiLogWeighted => self.n - 1,
            _ => 0,
        }
    }

    /// Summand at `q` given `ψ(q)` and `φ(q)`.
    pub fn summand(&self, q: u64, psi: f64, phi: u64) -> f64 {
        if psi == 0.0 {
            return 0.0;
        }
        let mut term = psi;
        let k = self.log_power();
        if k > 0 {
            term *= (q as f64).ln().powi(k as i32);
        }
        if self.uses_phi() {
            term *= (phi as f64 / q as f64).powi(self.n as i32);
        }
        term
    }
}

/// A validated approximating function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct ApproxFunction {
    family: Family,
}

impl TryFrom<Family> for ApproxFunction {
    type Error = Error;

    fn try_from(family: Family) -> Result<Self> {
        ApproxFunction::new(family)
    }
}

impl From<ApproxFunction> for Family {
    fn from(f: ApproxFunction) -> Family {
        f.family
    }
}

fn validate(family: &Family) -> Result<()> {
    match family {
        Family::PowerLog { c, a, b } => {
            if !(c.is_finite() && *c >= 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidFamily(format!(
                    "power_log needs finite c >= 0, a, b (got c={c}, a={a}, b={b})"
                )));
            }
        }
        Family::Table { values } => {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::InvalidFamily(format!(
                    "table values must be finite and >= 0 (got {v})"
                )));
            }
        }
        Family::IndicatorSupport { base, support } => {
            validate(base)?;
            support.validate()?;
        }
        Family::Conditional { base, anchors } => {
            validate(base)?;
            if anchors.is_empty() {
                return Err(Error::InvalidFamily("conditional needs at least one anchor".into()));
            }
            if anchors.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidFamily("anchors must lie in [0, 1]".into()));
            }
        }
        Family::PadicWeighted {
            base,
            primes,
            weights,
        } => {
            validate(base)?;
            if primes.len() != weights.len() {
                return Err(Error::InvalidFamily(format!(
                    "{} primes but {} weight functions",
                    primes.len(),
                    weights.len()
                )));
            }
            for (i, &p) in primes.iter().enumerate() {
                if !arith::is_prime(p) {
                    return Err(Error::NotPrime(p));
                }
                if primes[..i].contains(&p) {
                    return Err(Error::InvalidFamily(format!("prime {p} repeated")));
                }
            }
            for w in weights {
                let ok = match *w {
                    WeightFn::Identity => true,
                    WeightFn::Power { e } => e.is_finite(),
                    WeightFn::Constant { c } => c.is_finite() && c > 0.0,
                };
                if !ok {
                    return Err(Error::InvalidFamily(format!("weight {w:?} is not positive")));
                }
            }
        }
    }
    Ok(())
}

impl ApproxFunction {
    pub fn new(family: Family) -> Result<Self> {
        validate(&family)?;
        Ok(Self { family })
    }

    pub fn power_log(c: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(Family::PowerLog { c, a, b })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::power_log(c, 0.0, 0.0)
    }

    pub fn zero() -> Self {
        Self {
            family: Family::PowerLog {
                c: 0.0,
                a: 0.0,
                b: 0.0,
            },
        }
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        Self::new(Family::Table { values })
    }

    pub fn restricted(&self, support: Support) -> Result<Self> {
        Self::new(Family::IndicatorSupport {
            base: Box::new(self.family.clone()),
            support,
        })
    }

    /// Heuristic stand-in for a Duffin–Schaeffer style counterexample: `1/q`
    /// supported on multiples of the product of the first `k` primes, where
    /// `φ(q)/q` is as small as it gets. Not the classical construction.
    pub fn primorial_adversarial(k: u32) -> Result<Self> {
        Self::power_log(1.0, 1.0, 0.0)?.restricted(Support::PrimorialMultiples { k })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_table(&self) -> bool {
        matches!(self.family, Family::Table { .. })
    }

    /// `ψ(q)` for `q >= 1`; `+∞` only for conditional families.
    pub fn value(&self, q: u64) -> f64 {
        eval_family(&self.family, q)
    }

    /// Raw entries of a table family.
    pub fn table_values(&self) -> Option<&[f64]> {
        match &self.family {
            Family::Table { values } => Some(values),
            _ => None,
        }
    }

    /// Stored analytic knowledge about the criterion; never inferred from sums.
    pub fn classify(&self, c: SumCriterion) -> Verdict {
        classify_family(&self.family, c)
    }
}

fn eval_family(family: &Family, q: u64) -> f64 {
    match family {
        Family::PowerLog { c, a, b } => {
            if *c == 0.0 {
                return 0.0;
            }
            let qf = q as f64;
            let mut v = *c;
            if *a != 0.0 {
                v *= qf.powf(-a);
            }
            if *b != 0.0 {
                v *= (qf + 1.0).ln().powf(-b);
            }
            v
        }
        Family::Table { values } => q
            .checked_sub(1)
            .and_then(|i| values.get(i as usize))
            .copied()
            .unwrap_or(0.0),
        Family::IndicatorSupport { base, support } => {
            if support.contains(q) {
                eval_family(base, q)
            } else {
                0.0
            }
        }
        Family::Conditional { base, anchors } => {
            let alpha = eval_family(base, q);
            let denom: f64 = anchors
                .iter()
                .map(|&x| arith::dist_nearest(q, x))
                .product();
            if denom == 0.0 {
                if alpha > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                alpha / denom
            }
        }
        Family::PadicWeighted {
            base,
            primes,
            weights,
        } => {
            let alpha = eval_family(base, q);
            if alpha == 0.0 {
                return 0.0;
            }
            let denom: f64 = primes
                .iter()
                .zip(weights)
                .map(|(&p, w)| w.eval(padic_abs_f64(q, p)))
                .product();
            alpha / denom
        }
    }
}

fn padic_abs_f64(q: u64, p: u64) -> f64 {
    let mut m = q;
    let mut v = 1.0;
    while m > 0 && m % p == 0 {
        m /= p;
        v /= p as f64;
    }
    v
}

fn classify_family(family: &Family, c: SumCriterion) -> Verdict {
    match family {
        Family::PowerLog { c: scale, a, b } => {
            if *scale == 0.0 {
                return Verdict::KnownConvergent;
            }
            // Σ q^-a (ln q)^w / ln(q+1)^b; φ(q)/q factors have positive mean
            // and cannot change the verdict for these regular summands.
            let w = c.log_power() as f64;
            if *a < 1.0 {
                Verdict::KnownDivergent
            } else if *a > 1.0 {
                Verdict::KnownConvergent
            } else if b - w <= 1.0 {
                Verdict::KnownDivergent
            } else {
                Verdict::KnownConvergent
            }
        }
        Family::Table { .. } => Verdict::Unknown,
        Family::IndicatorSupport { base, support } => match support {
            Support::Multiples { .. } | Support::PrimorialMultiples { .. } => {
                if matches!(**base, Family::PowerLog { .. }) {
                    classify_family(base, c)
                } else {
                    Verdict::Unknown
                }
            }
            Support::PhiRatioBelow { .. } => Verdict::Unknown,
        },
        Family::Conditional { .. } => Verdict::Unknown,
        Family::PadicWeighted { base, weights, .. } => {
            if weights.iter().all(WeightFn::is_unit) {
                classify_family(base, c)
            } else {
                Verdict::Unknown
            }
        }
    }
}

/// `ψ(q)`; `q = 0` is a domain error.
pub fn psi_eval(f: &ApproxFunction, q: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::Domain("ψ is defined on q >= 1".into()));
    }
    Ok(f.value(q))
}

/// `ψ_(x1..xk)(q) = ψ(q) / ∏ ‖q x_i‖`.
pub fn conditional_psi(f: &ApproxFunction, anchors: &[f64]) -> Result<ApproxFunction> {
    ApproxFunction::new(Family::Conditional {
        base: Box::new(f.family.clone()),
        anchors: anchors.to_vec(),
    })
}

/// `q ↦ ψ(q) / ∏ f_i(|q|_{p_i})`.
pub fn padic_weighted_psi(
    f: &ApproxFunction,
    primes: &[u64],
    weights: &[WeightFn],
) -> Result<ApproxFunction> {
    ApproxFunction::new(Family::PadicWeighted {
        base: Box::new(f.family.clone()),
        primes: primes.to_vec(),
        weights: weights.to_vec(),
    })
}

/// Partial sums of the criterion at every checkpoint of `grid` (ascending).
pub fn partial_sums(f: &ApproxFunction, c: SumCriterion, grid: &[u64]) -> Result<Vec<f64>> {
    let Some(&top) = grid.last() else {
        return Ok(Vec::new());
    };
    if grid.first() == Some(&0) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("checkpoints must be ascending and >= 1".into()));
    }
    let table = if c.uses_phi() {
        Some(PhiTable::new(top)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(grid.len());
    let mut sum = 0.0f64;
    let mut next = 0;
    for q in 1..=top {
        let psi = f.value(q);
        if psi.is_infinite() {
            return Err(Error::Overflow { q });
        }
        let phi = match &table {
            Some(t) => t.values()[(q - 1) as usize] as u64,
            None => 0,
        };
        sum += c.summand(q, psi, phi);
        while next < grid.len() && grid[next] == q {
            out.push(sum);
            next += 1;
        }
    }
    Ok(out)
}

/// `Σ_{q=1}^{Q}` of the criterion's summand.
pub fn partial_sum(f: &ApproxFunction, c: SumCriterion, q_max: u64) -> Result<f64> {
    if q_max == 0 {
        return Err(Error::Domain("truncation Q must be >= 1".into()));
    }
    Ok(partial_sums(f, c, &[q_max])?[0])
}

/// Ratio of the φ-weighted to the plain log-weighted partial sums at `Q`.
pub fn cond1_ratio(f: &ApproxFunction, n: u32, q_max: u64) -> Result<f64> {
    let points = cond1_scan(f, n, &[q_max])?;
    points[0].ratio.ok_or(Error::UndefinedRatio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cond1Point {
    pub q: u64,
    /// `None` while the denominator is still zero.
    pub ratio: Option<f64>,
    /// Running maximum of the defined ratios so far (limsup proxy).
    pub running_max: Option<f64>,
}

/// Ratio at every checkpoint plus its running maximum.
pub fn cond1_scan(f: &ApproxFunction, n: u32, grid: &[u64]) -> Result<Vec<Cond1Point>> {
    let num = partial_sums(f, SumCriterion::new(CriterionKind::PhiLogWeighted, n)?, grid)?;
    let den = partial_sums(f, SumCriterion::new(CriterionKind::LogWeighted, n)?, grid)?;
    let mut best: Option<f64> = None;
    Ok(grid
        .iter()
        .zip(num.iter().zip(&den))
        .map(|(&q, (&a, &b))| {
            let ratio = (b > 0.0).then(|| a / b);
            if let Some(r) = ratio {
                best = Some(best.map_or(r, |m: f64| m.max(r)));
            }
            Cond1Point {
                q,
                ratio,
                running_max: best,
            }
        })
        .collect())
}

/// Geometric checkpoint grid `start, start·ratio, ...` capped at and ending in `end`.
pub fn geometric_grid(start: u64, end: u64, ratio: f64) -> Vec<u64> {
    let mut out = Vec::new();
    if start == 0 || end < start || ratio <= 1.0 {
        return out;
    }
    let mut x = start as f64;
    loop {
        let q = (x.round() as u64).min(end);
        if out.last() != Some(&q) {
            out.push(q);
        }
        if q >= end {
            break;
        }
        x *= ratio;
    }
    out
}
