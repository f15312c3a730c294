//! Divergence Borel–Cantelli lower bound
//! `μ(limsup E_k) >= limsup_Q (Σ_{s<=Q} μ(E_s))² / Σ_{s,t<=Q} μ(E_s ∩ E_t)`
//! and the quasi-independence diagnostics that feed it.
//!
//! At a finite truncation the same quotient is also a lower bound for
//! `μ(E_1 ∪ … ∪ E_Q)` (Cauchy–Schwarz), which is what the exact pipelines
//! check it against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{confidence_interval, MeasureEstimate};
use crate::psi::ApproxFunction;
use crate::regions::{self, IntervalUnion, Mode};
use crate::sampler::{member_delta, Inequality, PointStream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSource {
    Exact,
    MonteCarlo,
    IndependenceModel,
}

/// Dense symmetric `k × k` table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable<T> {
    k: usize,
    data: Vec<T>,
}

impl<T: Real> PairTable<T> {
    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = vec![T::zero(); k * k];
        for s in 0..k {
            for t in s..k {
                let v = f(s, t);
                data[s * k + t] = v;
                data[t * k + s] = v;
            }
        }
        Self { k, data }
    }

    pub fn get(&self, s: usize, t: usize) -> T {
        self.data[s * self.k + t]
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairMeasures<T> {
    /// `μ(E_s ∩ E_t) = μ(E_s) μ(E_t)` for `s ≠ t`.
    Independence,
    Exact(PairTable<T>),
    /// Monte Carlo point estimates with 95% bounds.
    Estimated {
        value: PairTable<T>,
        low: PairTable<T>,
        high: PairTable<T>,
    },
}

/// Single and pairwise measures of events `E_first, E_{first+1}, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStats<T> {
    first: u64,
    singles: Vec<T>,
    pairs: PairMeasures<T>,
}

impl<T: Real> EventStats<T> {
    pub fn new(first: u64, singles: Vec<T>, pairs: PairMeasures<T>) -> Result<Self> {
        let slack = T::lit(1e-12);
        if singles.iter().any(|&m| !(m >= T::zero() && m <= T::one())) {
            return Err(Error::Validation("single measures must lie in [0, 1]".into()));
        }
        let check_len = |t: &PairTable<T>| {
            if t.len() != singles.len() {
                Err(Error::Validation("pair table size differs from event count".into()))
            } else {
                Ok(())
            }
        };
        match &pairs {
            PairMeasures::Independence => {}
            PairMeasures::Exact(table) => {
                check_len(table)?;
                for s in 0..singles.len() {
                    if (table.get(s, s) - singles[s]).abs() > slack {
                        return Err(Error::Validation(format!("μ(E∩E) ≠ μ(E) at index {s}")));
                    }
                    for t in 0..singles.len() {
                        let v = table.get(s, t);
                        if v < T::zero() || v > singles[s].min(singles[t]) + slack {
                            return Err(Error::Validation(format!(
                                "pair ({s}, {t}) exceeds the smaller single measure"
                            )));
                        }
                    }
                }
            }
            PairMeasures::Estimated { value, low, high } => {
                check_len(value)?;
                check_len(low)?;
                check_len(high)?;
            }
        }
        Ok(Self {
            first,
            singles,
            pairs,
        })
    }

    /// Events with `μ(E_s ∩ E_t) = μ(E_s) μ(E_t)` off the diagonal.
    pub fn independent(first: u64, singles: Vec<T>) -> Result<Self> {
        Self::new(first, singles, PairMeasures::Independence)
    }

    pub fn len(&self) -> usize {
        self.singles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singles.is_empty()
    }

    pub fn first(&self) -> u64 {
        self.first
    }

    pub fn singles(&self) -> &[T] {
        &self.singles
    }

    pub fn source(&self) -> PairSource {
        match self.pairs {
            PairMeasures::Independence => PairSource::IndependenceModel,
            PairMeasures::Exact(_) => PairSource::Exact,
            PairMeasures::Estimated { .. } => PairSource::MonteCarlo,
        }
    }

    /// `μ(E_s ∩ E_t)` by event index (point estimate for Monte Carlo pairs).
    pub fn pair(&self, s: usize, t: usize) -> T {
        if s == t {
            return self.singles[s];
        }
        match &self.pairs {
            PairMeasures::Independence => self.singles[s] * self.singles[t],
            PairMeasures::Exact(table) => table.get(s, t),
            PairMeasures::Estimated { value, .. } => value.get(s, t),
        }
    }

    fn pair_bounds(&self, s: usize, t: usize) -> (T, T) {
        match &self.pairs {
            PairMeasures::Estimated { low, high, .. } if s != t => (low.get(s, t), high.get(s, t)),
            _ => {
                let v = self.pair(s, t);
                (v, v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPoint<T> {
    /// Number of events included.
    pub count: usize,
    /// Label of the last included event (its `q`).
    pub q: u64,
    pub bound: T,
    /// Interval from propagating pair-estimate bounds (equal to `bound`
    /// when pairs are exact).
    pub low: T,
    pub high: T,
    pub running_max: T,
}

/// `(Σ_{s<Q} μ_s)² / Σ_{s,t<Q} μ(E_s ∩ E_t)` over the first `count` events.
pub fn bc_lower_bound<T: Real>(stats: &EventStats<T>, count: usize) -> Result<T> {
    let scan = bc_scan(stats, &[count])?;
    scan[0].map(|p| p.bound).ok_or(Error::UndefinedBound)
}

/// Bound at each prefix length in `counts` (ascending); `None` where the
/// double sum is still zero. Running maximum is the limsup proxy.
pub fn bc_scan<T: Real>(stats: &EventStats<T>, counts: &[usize]) -> Result<Vec<Option<BoundPoint<T>>>> {
    if counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("prefix lengths must be ascending".into()));
    }
    if let Some(&c) = counts.last() {
        if c > stats.len() || counts[0] == 0 {
            return Err(Error::Domain(format!(
                "prefix lengths must lie in 1..={} (got {c})",
                stats.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(counts.len());
    let (mut sum, mut dbl, mut dbl_lo, mut dbl_hi) = (T::zero(), T::zero(), T::zero(), T::zero());
    let mut best: Option<T> = None;
    let mut next = 0;
    let independent = matches!(stats.pairs, PairMeasures::Independence);
    let two = T::lit(2.0);
    for q in 0..stats.len() {
        if next == counts.len() {
            break;
        }
        let mu = stats.singles[q];
        // row q against all earlier events, counted twice, plus the diagonal
        if independent {
            dbl = dbl + mu + two * mu * sum;
            dbl_lo = dbl;
            dbl_hi = dbl;
        } else {
            let (mut row, mut row_lo, mut row_hi) = (T::zero(), T::zero(), T::zero());
            for s in 0..q {
                let (lo, hi) = stats.pair_bounds(s, q);
                row = row + stats.pair(s, q);
                row_lo = row_lo + lo;
                row_hi = row_hi + hi;
            }
            dbl = dbl + mu + two * row;
            dbl_lo = dbl_lo + mu + two * row_lo;
            dbl_hi = dbl_hi + mu + two * row_hi;
        }
        sum = sum + mu;
        while next < counts.len() && counts[next] == q + 1 {
            if dbl > T::zero() {
                let sq = sum * sum;
                let bound = sq / dbl;
                let low = if dbl_hi > T::zero() { sq / dbl_hi } else { bound };
                let high = if dbl_lo > T::zero() { (sq / dbl_lo).min(T::one()) } else { T::one() };
                let rm = best.map_or(bound, |b| b.max(bound));
                best = Some(rm);
                out.push(Some(BoundPoint {
                    count: q + 1,
                    q: stats.first + q as u64,
                    bound,
                    low,
                    high,
                    running_max: rm,
                }));
            } else {
                out.push(None);
            }
            next += 1;
        }
    }
    Ok(out)
}

/// `|H(ψ,q) ∩ H(ψ,r)| / (ψ(q) (ln q)^(n-1) · ψ(r) (ln r)^(n-1))`.
pub fn quasi_independence_ratio(
    q: u64,
    r: u64,
    f: &ApproxFunction,
    n: u32,
    intersection: &MeasureEstimate,
) -> Result<f64> {
    if q == r || q == 0 || r == 0 || n == 0 {
        return Err(Error::Domain("need distinct q, r >= 1 and n >= 1".into()));
    }
    if n >= 2 && (q < 2 || r < 2) {
        return Err(Error::Domain("n >= 2 needs q, r >= 2 so that ln q > 0".into()));
    }
    let weight = |x: u64| f.value(x) * (x as f64).ln().powi(n as i32 - 1);
    let den = weight(q) * weight(r);
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::UndefinedRatio);
    }
    Ok(intersection.value / den)
}

/// Exact 1-D event statistics for `q` in `q0..=q1`: singles and pairs from
/// interval unions.
pub fn exact_stats_1d(f: &ApproxFunction, q0: u64, q1: u64, coprime: bool) -> Result<EventStats<f64>> {
    if q0 == 0 || q0 > q1 {
        return Err(Error::Domain("need 1 <= q0 <= q1".into()));
    }
    if let Some(q) = (q0..=q1).find(|&q| f.value(q).is_infinite()) {
        return Err(Error::Overflow { q });
    }
    let unions: Vec<IntervalUnion<f64>> = (q0..=q1)
        .map(|q| {
            let d = f.value(q);
            if d > 0.0 {
                regions::slice_intervals_1d(q, d, coprime)
            } else {
                IntervalUnion::empty()
            }
        })
        .collect();
    let singles: Vec<f64> = unions.iter().map(IntervalUnion::measure).collect();
    let table = PairTable::from_fn(unions.len(), |s, t| {
        if s == t {
            singles[s]
        } else {
            unions[s].intersection_measure(&unions[t])
        }
    });
    EventStats::new(q0, singles, PairMeasures::Exact(table))
}

/// Parameters for Monte Carlo pair tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPairs {
    pub samples: u64,
    pub seed: u64,
}

/// Exact singles (from the regions module) with Monte Carlo pair estimates
/// from one shared sample of points.
pub fn sampled_stats(
    f: &ApproxFunction,
    q0: u64,
    q1: u64,
    n: u32,
    mode: Mode,
    coprime: bool,
    sampling: SampledPairs,
) -> Result<EventStats<f64>> {
    let singles: Vec<f64> = regions::slice_measures(f, q0, q1, n, mode, coprime, regions::DEFAULT_TOL)?
        .into_iter()
        .map(|m| m.value)
        .collect();
    let k = singles.len();
    let psi: Vec<f64> = (q0..=q1).map(|q| f.value(q)).collect();
    let stream = PointStream::new(sampling.seed);
    let mut hits = vec![0u64; k * k];
    // membership lists are computed in parallel blocks and folded in index
    // order, so the table does not depend on the worker count
    const BLOCK: u64 = 1 << 14;
    for start in (0..sampling.samples).step_by(BLOCK as usize) {
        let end = (start + BLOCK).min(sampling.samples);
        let lists: Vec<Vec<usize>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let x = stream.point(i, n as usize);
                psi.iter()
                    .enumerate()
                    .filter(|&(j, &d)| d > 0.0 && member_delta(&x, q0 + j as u64, d, mode, coprime, Inequality::Strict))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        for members in lists {
            for (a, &s) in members.iter().enumerate() {
                for &t in &members[a..] {
                    hits[s * k + t] += 1;
                }
            }
        }
    }
    let n_s = sampling.samples;
    let est = |s: usize, t: usize| hits[s.min(t) * k + s.max(t)];
    let value = PairTable::from_fn(k, |s, t| if s == t { singles[s] } else { est(s, t) as f64 / n_s as f64 });
    let low = PairTable::from_fn(k, |s, t| if s == t { singles[s] } else { confidence_interval(est(s, t), n_s).0 });
    let high = PairTable::from_fn(k, |s, t| if s == t { singles[s] } else { confidence_interval(est(s, t), n_s).1 });
    EventStats::new(q0, singles, PairMeasures::Estimated { value, low, high })
}
