//! Monte Carlo estimation of truncated union measures and pairwise
//! intersections, per-point solution counts, and small linear-forms
//! enumeration.
//!
//! Sample `i` of a run with seed `s` is a pure function of `(s, i)`: a
//! ChaCha8 generator keyed by `s` with its stream id set to `i`. Hits are
//! aggregated as integer counters, so any split of the index range across
//! workers produces identical results.

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{coprime_distance, dist_nearest};
use crate::error::{Error, Result};
use crate::estimate::MeasureEstimate;
use crate::psi::ApproxFunction;
use crate::regions::Mode;

/// Identifier recorded with every Monte Carlo output.
pub const GENERATOR_ID: &str = "chacha8-stream-v1";

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "DIOPH_WORKERS";

const CHUNK: u64 = 1024;

/// Maximum number of integer vectors `linear_forms_count` will enumerate.
pub const LINEAR_FORMS_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    #[default]
    Strict,
    NonStrict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: ApproxFunction,
    pub n: u32,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub coprime: bool,
    pub q0: u64,
    pub q: u64,
    pub samples: u64,
    pub seed: u64,
    /// Checkpoints; empty means just `q`.
    #[serde(default)]
    pub q_grid: Vec<u64>,
}

fn default_mode() -> Mode {
    Mode::Product
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "dimension must be >= 1"));
        }
        if self.q0 == 0 || self.q0 > self.q {
            return Err(Error::config("q0", format!("need 1 <= q0 <= q (got {}, {})", self.q0, self.q)));
        }
        if self.samples == 0 {
            return Err(Error::config("samples", "need at least one sample"));
        }
        if self.q_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("q_grid", "checkpoints must be strictly increasing"));
        }
        if self.q_grid.iter().any(|&g| g < self.q0 || g > self.q) {
            return Err(Error::config("q_grid", "checkpoints must lie in [q0, q]"));
        }
        Ok(())
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        if self.q_grid.is_empty() {
            vec![self.q]
        } else {
            self.q_grid.clone()
        }
    }
}

/// Worker count: explicit value, else `DIOPH_WORKERS`, else 1.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1)
}

/// Reproducible uniform points in `[0, 1)^n`.
#[derive(Debug, Clone)]
pub struct PointStream {
    base: ChaCha8Rng,
}

impl PointStream {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn fill(&self, index: u64, out: &mut [f64]) {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        for v in out.iter_mut() {
            *v = rng.gen::<f64>();
        }
    }

    pub fn point(&self, index: u64, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill(index, &mut v);
        v
    }
}

fn compare(lhs: f64, rhs: f64, ineq: Inequality) -> bool {
    match ineq {
        Inequality::Strict => lhs < rhs,
        Inequality::NonStrict => lhs <= rhs,
    }
}

/// Membership of `x` in the `q`-slice with threshold `delta = ψ(q)`.
pub fn member_delta(x: &[f64], q: u64, delta: f64, mode: Mode, coprime: bool, ineq: Inequality) -> bool {
    if ineq == Inequality::Strict && delta <= 0.0 {
        return false;
    }
    let n = x.len() as i32;
    match mode {
        Mode::Product => {
            // ‖·‖ <= ‖·‖′, so the plain product is a cheap necessary test
            let prod: f64 = x.iter().map(|&xi| dist_nearest(q, xi)).product();
            if !compare(prod, delta, ineq) {
                return false;
            }
            if !coprime {
                return true;
            }
            let mut prod = 1.0;
            for &xi in x {
                prod *= coprime_distance(q as f64 * xi, q);
            }
            compare(prod, delta, ineq)
        }
        Mode::Max => {
            let m = x
                .iter()
                .map(|&xi| {
                    if coprime {
                        coprime_distance(q as f64 * xi, q)
                    } else {
                        dist_nearest(q, xi)
                    }
                })
                .fold(0.0, f64::max);
            compare(m.powi(n), delta, ineq)
        }
    }
}

/// Strict membership `∏ ‖q x_i‖(′) < ψ(q)` (or the max form).
pub fn membership(x: &[f64], q: u64, f: &ApproxFunction, mode: Mode, coprime: bool) -> bool {
    member_delta(x, q, f.value(q), mode, coprime, Inequality::Strict)
}

pub(crate) fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Counts, per chunk and then summed, of samples whose first hit bucket is
/// each index; `bucket` returns `None` for misses.
fn count_hits<B>(samples: u64, buckets: usize, workers: usize, bucket: B) -> Result<Vec<u64>>
where
    B: Fn(u64) -> Option<usize> + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    with_pool(workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut local = vec![0u64; buckets];
                let end = ((c + 1) * CHUNK).min(samples);
                for i in c * CHUNK..end {
                    if let Some(b) = bucket(i) {
                        local[b] += 1;
                    }
                }
                local
            })
            .reduce(
                || vec![0u64; buckets],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    })
}

/// Hit fractions of `⋃_{Q0 <= q <= Qc}` slices at every checkpoint `Qc`.
pub fn estimate_union_measure(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<(u64, MeasureEstimate)>> {
    cfg.validate()?;
    let grid = cfg.checkpoints();
    let psi: Vec<f64> = (cfg.q0..=cfg.q).map(|q| cfg.family.value(q)).collect();
    let certain_empty = psi.iter().all(|&d| d == 0.0);
    let n = cfg.n as usize;
    let stream = PointStream::new(cfg.seed);
    let counts = if certain_empty {
        vec![0u64; grid.len()]
    } else {
        count_hits(cfg.samples, grid.len(), workers, |i| {
            let x = stream.point(i, n);
            first_hit_bucket(&x, cfg, &psi, &grid)
        })?
    };
    let mut cumulative = 0u64;
    Ok(grid
        .iter()
        .zip(counts)
        .map(|(&qc, c)| {
            cumulative += c;
            (
                qc,
                MeasureEstimate::monte_carlo(cumulative, cfg.samples, cfg.seed, GENERATOR_ID, certain_empty),
            )
        })
        .collect())
}

fn first_hit_bucket(x: &[f64], cfg: &ExperimentConfig, psi: &[f64], grid: &[u64]) -> Option<usize> {
    let top = *grid.last()?;
    for q in cfg.q0..=top {
        let delta = psi[(q - cfg.q0) as usize];
        if delta > 0.0 && member_delta(x, q, delta, cfg.mode, cfg.coprime, Inequality::Strict) {
            return Some(grid.partition_point(|&g| g < q));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairQuery<'a> {
    pub q: u64,
    pub r: u64,
    pub family: &'a ApproxFunction,
    pub n: u32,
    pub mode: Mode,
    pub coprime: bool,
}

/// Hit fraction of the intersection of the `q`- and `r`-slices.
pub fn estimate_pairwise_intersection(query: PairQuery<'_>, samples: u64, seed: u64, workers: usize) -> Result<MeasureEstimate> {
    if query.q == 0 || query.r == 0 || query.n == 0 || samples == 0 {
        return Err(Error::Domain("need q, r, n, samples >= 1".into()));
    }
    let dq = query.family.value(query.q);
    let dr = query.family.value(query.r);
    let certain_empty = dq == 0.0 || dr == 0.0;
    let n = query.n as usize;
    let stream = PointStream::new(seed);
    let hits = if certain_empty {
        0
    } else {
        count_hits(samples, 1, workers, |i| {
            let x = stream.point(i, n);
            let hit = member_delta(&x, query.q, dq, query.mode, query.coprime, Inequality::Strict)
                && member_delta(&x, query.r, dr, query.mode, query.coprime, Inequality::Strict);
            hit.then_some(0)
        })?[0]
    };
    Ok(MeasureEstimate::monte_carlo(hits, samples, seed, GENERATOR_ID, certain_empty))
}

/// `#{q <= Q : membership}` with a strict inequality.
pub fn solution_count(x: &[f64], f: &ApproxFunction, q_max: u64, mode: Mode, coprime: bool) -> u64 {
    solution_counts(x, f, &[q_max], mode, coprime, Inequality::Strict)[0]
}

/// Cumulative solution counts at each (ascending) checkpoint.
pub fn solution_counts(x: &[f64], f: &ApproxFunction, grid: &[u64], mode: Mode, coprime: bool, ineq: Inequality) -> Vec<u64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut count = 0u64;
    let mut q = 1u64;
    for &g in grid {
        while q <= g {
            let delta = f.value(q);
            if member_delta(x, q, delta, mode, coprime, ineq) {
                count += 1;
            }
            q += 1;
        }
        out.push(count);
    }
    out
}

/// Counts integer vectors `q ∈ Z^m \ {0}`, `‖q‖∞ <= Qbound`, for which
/// `∏_i |(qX)_i + p_i| < Ψ(q)` with each `p_i` chosen to minimize its
/// factor; `Ψ(q) = ψ(‖q‖∞)`. With `coprime`, `p_i` must satisfy
/// `gcd(p_i, gcd(q_1, …, q_m)) = 1`.
pub fn linear_forms_count(matrix: &[Vec<f64>], psi: &ApproxFunction, q_bound: u64, coprime: bool) -> Result<u64> {
    let m = matrix.len();
    let n = matrix.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || matrix.iter().any(|row| row.len() != n) {
        return Err(Error::Domain("matrix must be a non-empty m×n array".into()));
    }
    let side = 2 * q_bound as u128 + 1;
    let needed = side.checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > LINEAR_FORMS_BUDGET {
        return Err(Error::Resource {
            what: "linear forms enumeration",
            needed,
            budget: LINEAR_FORMS_BUDGET,
        });
    }
    let b = q_bound as i64;
    let mut qv = vec![-b; m];
    let mut count = 0u64;
    let mut y = vec![0.0; n];
    loop {
        if qv.iter().any(|&v| v != 0) {
            let sup = qv.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
            let bound = psi.value(sup);
            if bound > 0.0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = qv.iter().zip(matrix).map(|(&qj, row)| qj as f64 * row[i]).sum();
                }
                let g = qv.iter().fold(0u64, |acc, v| acc.gcd(&v.unsigned_abs()));
                let prod: f64 = y
                    .iter()
                    .map(|&yi| if coprime { coprime_distance(yi, g) } else { (yi - yi.round()).abs() })
                    .product();
                if prod < bound {
                    count += 1;
                }
            }
        }
        // odometer over [-b, b]^m
        let mut k = 0;
        loop {
            if k == m {
                return Ok(count);
            }
            if qv[k] < b {
                qv[k] += 1;
                break;
            }
            qv[k] = -b;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: ApproxFunction, n: u32, coprime: bool, q0: u64, q: u64, samples: u64) -> ExperimentConfig {
        ExperimentConfig {
            family,
            n,
            mode: Mode::Product,
            coprime,
            q0,
            q,
            samples,
            seed: 42,
            q_grid: Vec::new(),
        }
    }

    #[test]
    fn membership_examples() {
        let zero = ApproxFunction::zero();
        assert!(!membership(&[0.0, 0.0], 3, &zero, Mode::Product, false));
        let t = ApproxFunction::constant(0.1).unwrap();
        assert!(membership(&[1.0 / 3.0], 3, &t, Mode::Product, false));
        let tiny = ApproxFunction::constant(1e-6).unwrap();
        assert!(membership(&[0.5, 0.5], 2, &tiny, Mode::Product, false));
        // p = 1 is coprime to 2, but p = 0 is not
        assert!(membership(&[0.5, 0.5], 2, &tiny, Mode::Product, true));
        assert!(membership(&[0.0, 0.0], 2, &tiny, Mode::Product, false));
        assert!(!membership(&[0.0, 0.0], 2, &tiny, Mode::Product, true));
    }

    #[test]
    fn coprime_membership_implies_plain() {
        let f = ApproxFunction::power_log(0.5, 1.0, 0.0).unwrap();
        let s = PointStream::new(3);
        for i in 0..2000 {
            let x = s.point(i, 2);
            for q in 1..40 {
                for mode in [Mode::Product, Mode::Max] {
                    if membership(&x, q, &f, mode, true) {
                        assert!(membership(&x, q, &f, mode, false));
                    }
                }
            }
        }
    }

    #[test]
    fn stream_is_keyed_by_seed_and_index() {
        let a = PointStream::new(9);
        assert_eq!(a.point(5, 3), PointStream::new(9).point(5, 3));
        assert_ne!(a.point(5, 3), a.point(6, 3));
        assert_ne!(a.point(5, 3), PointStream::new(10).point(5, 3));
        assert!(a.point(7, 8).iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn union_examples() {
        let mut c = cfg(ApproxFunction::zero(), 2, true, 1, 100, 5000);
        c.q_grid = vec![10, 50, 100];
        for (_, e) in estimate_union_measure(&c, 1).unwrap() {
            assert_eq!(e.value, 0.0);
            assert_eq!(e.ci_width(), 0.0);
        }
        let c = cfg(ApproxFunction::constant(0.6).unwrap(), 1, false, 1, 1, 2000);
        let e = &estimate_union_measure(&c, 1).unwrap()[0].1;
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn checkpoints_are_monotone_and_worker_invariant() {
        let mut c = cfg(ApproxFunction::power_log(0.25, 1.0, 0.0).unwrap(), 2, true, 2, 300, 3000);
        c.q_grid = vec![4, 16, 64, 300];
        let one = estimate_union_measure(&c, 1).unwrap();
        for w in one.windows(2) {
            assert!(w[1].1.value >= w[0].1.value);
        }
        for workers in [2, 3, 8] {
            assert_eq!(estimate_union_measure(&c, workers).unwrap(), one);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(ApproxFunction::zero(), 1, false, 5, 4, 10);
        assert!(c.validate().is_err());
        c.q = 10;
        c.q_grid = vec![6, 6];
        assert!(c.validate().is_err());
        c.q_grid = vec![3, 6];
        assert!(c.validate().is_err());
        c.q_grid = vec![6, 10];
        assert!(c.validate().is_ok());
        c.samples = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn pairwise_examples() {
        let f = ApproxFunction::power_log(0.25, 1.0, 0.0).unwrap();
        let q = |q, r| PairQuery {
            q,
            r,
            family: &f,
            n: 2,
            mode: Mode::Product,
            coprime: true,
        };
        let same = estimate_pairwise_intersection(q(7, 7), 4000, 1, 1).unwrap();
        let single = {
            let mut c = cfg(f.clone(), 2, true, 7, 7, 4000);
            c.seed = 1;
            estimate_union_measure(&c, 1).unwrap()[0].1.clone()
        };
        assert_eq!(same.value, single.value);
        let zero = ApproxFunction::zero();
        let z = estimate_pairwise_intersection(PairQuery { family: &zero, ..q(3, 5) }, 100, 1, 1).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn solution_count_examples() {
        let f = ApproxFunction::constant(0.3).unwrap();
        assert_eq!(solution_count(&[0.5], &f, 10, Mode::Product, false), 5);
        assert_eq!(solution_count(&[0.5], &ApproxFunction::zero(), 10, Mode::Product, false), 0);
        let eps = ApproxFunction::constant(1e-9).unwrap();
        let x = [2.0 / 7.0, 3.0 / 7.0];
        assert!(solution_count(&x, &eps, 100, Mode::Product, false) >= 100 / 7);
    }

    #[test]
    fn linear_forms_examples() {
        assert_eq!(linear_forms_count(&[vec![0.5]], &ApproxFunction::zero(), 10, false).unwrap(), 0);
        let f = ApproxFunction::constant(0.3).unwrap();
        assert_eq!(linear_forms_count(&[vec![0.5]], &f, 10, false).unwrap(), 10);
        // m = 1 agrees with solution_count after the ± symmetry
        let g = ApproxFunction::power_log(0.4, 1.0, 0.0).unwrap();
        let s = PointStream::new(11);
        for i in 0..30 {
            let x = s.point(i, 2);
            for coprime in [false, true] {
                let lf = linear_forms_count(&[x.clone()], &g, 60, coprime).unwrap();
                let sc = solution_count(&x, &g, 60, Mode::Product, coprime);
                assert_eq!(lf, 2 * sc);
            }
        }
        assert!(matches!(
            linear_forms_count(&vec![vec![0.1]; 4], &f, 1000, false),
            Err(Error::Resource { .. })
        ));
        assert!(linear_forms_count(&[vec![0.1], vec![0.1, 0.2]], &f, 3, false).is_err());
    }

    #[test]
    fn linear_forms_two_rows_brute_force() {
        let x = vec![vec![0.3141, 0.2718], vec![0.5772, 0.1618]];
        let f = ApproxFunction::power_log(0.5, 1.0, 0.0).unwrap();
        let b = 12i64;
        let mut brute = 0;
        for q1 in -b..=b {
            for q2 in -b..=b {
                if q1 == 0 && q2 == 0 {
                    continue;
                }
                let sup = q1.unsigned_abs().max(q2.unsigned_abs());
                let mut prod = 1.0;
                for i in 0..2 {
                    let y = q1 as f64 * x[0][i] + q2 as f64 * x[1][i];
                    // best p over a window
                    prod *= (-30..=30).map(|p| (y + p as f64).abs()).fold(f64::INFINITY, f64::min);
                }
                if prod < f.value(sup) {
                    brute += 1;
                }
            }
        }
        assert_eq!(linear_forms_count(&x, &f, b as u64, false).unwrap(), brute);
    }
}
