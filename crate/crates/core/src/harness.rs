//! Pre-assembled experiments: zero-one dichotomy scans, Borel–Cantelli
//! evidence, quasi-independence band scans, and p-adic weighted counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::PhiTable;
use crate::borel_cantelli::{self, bc_scan, EventStats, PairSource, SampledPairs};
use crate::error::{Error, Result};
use crate::estimate::MeasureEstimate;
use crate::psi::{partial_sums, ApproxFunction, CriterionKind, SumCriterion, Verdict};
use crate::regions::{self, Mode};
use crate::sampler::{estimate_union_measure, solution_counts, with_pool, ExperimentConfig, Inequality, PointStream};
use crate::config::PadicConfig;

pub const DEFAULT_THRESHOLD_HI: f64 = 0.95;
pub const DEFAULT_THRESHOLD_LO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    ExpectFull,
    ExpectNull,
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryEntry {
    pub label: String,
    pub expect: Expectation,
    /// Stored divergence verdict backing a full/null expectation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<Verdict>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Battery {
    pub name: String,
    #[serde(default = "default_hi")]
    pub threshold_hi: f64,
    #[serde(default = "default_lo")]
    pub threshold_lo: f64,
    pub entries: Vec<BatteryEntry>,
}

fn default_hi() -> f64 {
    DEFAULT_THRESHOLD_HI
}

fn default_lo() -> f64 {
    DEFAULT_THRESHOLD_LO
}

/// Divergence sum governing the dichotomy for this configuration:
/// `ψ(q) (ln q)^(n-1)` for hyperbolic domains, `ψ(q)` for cubical ones,
/// each with `(φ(q)/q)^n` when numerators are coprime.
pub fn governing_criterion(cfg: &ExperimentConfig) -> Result<SumCriterion> {
    let kind = match (cfg.mode, cfg.coprime) {
        (Mode::Product, false) => CriterionKind::LogWeighted,
        (Mode::Product, true) => CriterionKind::PhiLogWeighted,
        (Mode::Max, false) => CriterionKind::Plain,
        (Mode::Max, true) => CriterionKind::PhiPlain,
    };
    SumCriterion::new(kind, cfg.n)
}

impl Battery {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.threshold_lo && self.threshold_lo < self.threshold_hi && self.threshold_hi < 1.0) {
            return Err(Error::config("threshold_lo", "need 0 < threshold_lo < threshold_hi < 1"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if self.entries[..i].iter().any(|o| o.label == e.label) {
                return Err(Error::config(format!("entries[{i}].label"), format!("duplicate label {}", e.label)));
            }
            e.config.validate().map_err(|err| match err {
                Error::Config { field, message } => Error::config(format!("entries[{i}].config.{field}"), message),
                other => other,
            })?;
            let needed = match e.expect {
                Expectation::ExpectFull => Verdict::KnownDivergent,
                Expectation::ExpectNull => Verdict::KnownConvergent,
                Expectation::Exploratory => continue,
            };
            let stored = e.config.family.classify(governing_criterion(&e.config)?);
            if e.justification != Some(needed) || stored != needed {
                return Err(Error::config(
                    format!("entries[{i}].justification"),
                    format!("{:?} needs a {needed} tag backed by the family metadata (family says {stored})", e.expect),
                ));
            }
        }
        Ok(())
    }

    /// Desk-scale demonstration of the multiplicative Duffin–Schaeffer
    /// dichotomy in the plane: divergent families trend to full measure,
    /// convergent ones to null, on tail unions.
    pub fn theorem2_demo() -> Self {
        let cfg = |family: ApproxFunction, coprime: bool, q0: u64, q: u64, samples: u64, seed: u64| ExperimentConfig {
            family,
            n: 2,
            mode: Mode::Product,
            coprime,
            q0,
            q,
            samples,
            seed,
            q_grid: regions_grid(q0, q),
        };
        let divergent = ApproxFunction::power_log(0.25, 1.0, 0.0).expect("valid family");
        let convergent = ApproxFunction::power_log(1.0, 1.0, 4.0).expect("valid family");
        let entry = |label: &str, expect, justification, config| BatteryEntry {
            label: label.to_string(),
            expect,
            justification,
            config,
        };
        Battery {
            name: "theorem2-demo".into(),
            threshold_hi: DEFAULT_THRESHOLD_HI,
            threshold_lo: DEFAULT_THRESHOLD_LO,
            entries: vec![
                entry(
                    "zero",
                    Expectation::ExpectNull,
                    Some(Verdict::KnownConvergent),
                    cfg(ApproxFunction::zero(), true, 1, 1000, 1000, 1),
                ),
                entry(
                    "divergent-plain",
                    Expectation::ExpectFull,
                    Some(Verdict::KnownDivergent),
                    cfg(divergent.clone(), false, 100, 10_000, 20_000, 2),
                ),
                entry(
                    "divergent-coprime",
                    Expectation::ExpectFull,
                    Some(Verdict::KnownDivergent),
                    cfg(divergent, true, 100, 10_000, 20_000, 3),
                ),
                entry(
                    "convergent-tail",
                    Expectation::ExpectNull,
                    Some(Verdict::KnownConvergent),
                    cfg(convergent, true, 1000, 100_000, 4000, 4),
                ),
            ],
        }
    }
}

fn regions_grid(q0: u64, q: u64) -> Vec<u64> {
    let mut g = crate::psi::geometric_grid(q0.max(1), q, 10f64.sqrt());
    g.retain(|&x| x >= q0);
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    FullTrending,
    NullTrending,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyOutcome {
    pub label: String,
    pub expect: Expectation,
    pub config: ExperimentConfig,
    pub checkpoints: Vec<(u64, MeasureEstimate)>,
    pub trend: Trend,
    pub meets_expectation: bool,
}

pub fn classify_trend(value: f64, hi: f64, lo: f64) -> Trend {
    if value >= hi {
        Trend::FullTrending
    } else if value <= lo {
        Trend::NullTrending
    } else {
        Trend::Inconclusive
    }
}

/// Tail-union estimates over each entry's checkpoints, classified at the
/// last checkpoint.
pub fn run_dichotomy_scan(b: &Battery, workers: usize) -> Result<Vec<DichotomyOutcome>> {
    b.validate()?;
    b.entries
        .iter()
        .map(|e| {
            let checkpoints = estimate_union_measure(&e.config, workers)?;
            let last = checkpoints.last().map_or(0.0, |c| c.1.value);
            let trend = classify_trend(last, b.threshold_hi, b.threshold_lo);
            let meets_expectation = match e.expect {
                Expectation::ExpectFull => trend == Trend::FullTrending,
                Expectation::ExpectNull => trend == Trend::NullTrending,
                Expectation::Exploratory => true,
            };
            Ok(DichotomyOutcome {
                label: e.label.clone(),
                expect: e.expect,
                config: e.config.clone(),
                checkpoints,
                trend,
                meets_expectation,
            })
        })
        .collect()
}

/// `|H(ψ,q)| / ((φ(q)/q)^n ψ(q) (ln q)^(n-1))` (without the `φ` factor for
/// plain numerators); `None` where the denominator vanishes.
pub fn sumcon_ratio(q: u64, f: &ApproxFunction, n: u32, mode: Mode, coprime: bool, phi: u64) -> Result<Option<f64>> {
    let psi = f.value(q);
    let log_power = if mode == Mode::Product { n as i32 - 1 } else { 0 };
    let mut den = psi * (q as f64).ln().powi(log_power);
    if coprime {
        den *= (phi as f64 / q as f64).powi(n as i32);
    }
    if !(den > 0.0) {
        return Ok(None);
    }
    let m = regions::region_measure(
        &regions::RegionSpec {
            q,
            n,
            delta: psi,
            mode,
            coprime,
        },
        regions::DEFAULT_TOL,
    )?;
    Ok(Some(m.value / den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
    pub q_low: u64,
    pub q_high: u64,
}

impl Band {
    pub fn factor(&self) -> f64 {
        self.high / self.low
    }
}

/// Ratios on `grid` and the band `[min, max]` they occupy.
pub fn sumcon_band(f: &ApproxFunction, n: u32, mode: Mode, coprime: bool, grid: &[u64]) -> Result<(Vec<(u64, Option<f64>)>, Option<Band>)> {
    let top = grid.iter().copied().max().unwrap_or(1);
    let table = PhiTable::new(top)?;
    let rows = grid
        .iter()
        .map(|&q| Ok((q, sumcon_ratio(q, f, n, mode, coprime, table.phi(q)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut band: Option<Band> = None;
    for &(q, r) in &rows {
        let Some(r) = r else { continue };
        band = Some(match band {
            None => Band {
                low: r,
                high: r,
                q_low: q,
                q_high: q,
            },
            Some(mut b) => {
                if r < b.low {
                    b.low = r;
                    b.q_low = q;
                }
                if r > b.high {
                    b.high = r;
                    b.q_high = q;
                }
                b
            }
        });
    }
    Ok((rows, band))
}

/// Where pairwise intersection measures come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairChoice {
    /// Interval intersections (one dimension only).
    Exact,
    /// `μ(E_s) μ(E_t)`: a synthetic model that bypasses the geometry.
    Independence,
    MonteCarlo(SampledPairs),
}

/// Cap on `k² · Q` interval operations for exact pair tables.
pub const EXACT_PAIR_BUDGET: u128 = 4_000_000_000;
/// Cap on `k` for dense Monte Carlo pair tables.
pub const SAMPLED_PAIR_LIMIT: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcRow {
    pub q: u64,
    pub bound: Option<f64>,
    pub bound_low: Option<f64>,
    pub bound_high: Option<f64>,
    pub union: MeasureEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcEvidence {
    pub pairs: PairSource,
    pub rows: Vec<BcRow>,
    pub sumcon: Vec<(u64, Option<f64>)>,
    pub anomalies: Vec<String>,
}

/// Borel–Cantelli bound curve against union measures at every checkpoint.
///
/// The union column is exact for one-dimensional exact pairs and Monte
/// Carlo otherwise. A bound above `union + 3·CI width` is an anomaly.
pub fn run_bc_evidence(cfg: &ExperimentConfig, pairs: PairChoice, workers: usize) -> Result<BcEvidence> {
    cfg.validate()?;
    let grid = cfg.checkpoints();
    let source = match pairs {
        PairChoice::Exact => PairSource::Exact,
        PairChoice::Independence => PairSource::IndependenceModel,
        PairChoice::MonteCarlo(_) => PairSource::MonteCarlo,
    };
    if (cfg.q0..=cfg.q).all(|q| cfg.family.value(q) == 0.0) {
        return Ok(BcEvidence {
            pairs: source,
            rows: Vec::new(),
            sumcon: Vec::new(),
            anomalies: Vec::new(),
        });
    }
    let k = cfg.q - cfg.q0 + 1;
    let stats: EventStats<f64> = match pairs {
        PairChoice::Exact => {
            if cfg.n != 1 {
                return Err(Error::Domain("exact pair tables need n = 1".into()));
            }
            let needed = (k as u128) * (k as u128) * cfg.q as u128;
            if needed > EXACT_PAIR_BUDGET {
                return Err(Error::Resource {
                    what: "exact pair-table interval operations",
                    needed,
                    budget: EXACT_PAIR_BUDGET,
                });
            }
            borel_cantelli::exact_stats_1d(&cfg.family, cfg.q0, cfg.q, cfg.coprime)?
        }
        PairChoice::Independence => {
            let singles = regions::slice_measures(&cfg.family, cfg.q0, cfg.q, cfg.n, cfg.mode, cfg.coprime, regions::DEFAULT_TOL)?
                .into_iter()
                .map(|m| m.value)
                .collect();
            EventStats::independent(cfg.q0, singles)?
        }
        PairChoice::MonteCarlo(sampling) => {
            if k > SAMPLED_PAIR_LIMIT {
                return Err(Error::Resource {
                    what: "events in a sampled pair table",
                    needed: k as u128,
                    budget: SAMPLED_PAIR_LIMIT as u128,
                });
            }
            with_pool(workers, || {
                borel_cantelli::sampled_stats(&cfg.family, cfg.q0, cfg.q, cfg.n, cfg.mode, cfg.coprime, sampling)
            })??
        }
    };
    let counts: Vec<usize> = grid.iter().map(|&g| (g - cfg.q0 + 1) as usize).collect();
    let bounds = bc_scan(&stats, &counts)?;
    let unions: Vec<MeasureEstimate> = if cfg.n == 1 && pairs == PairChoice::Exact {
        grid.iter()
            .map(|&g| regions::truncated_union_1d(&cfg.family, cfg.q0, g, cfg.coprime))
            .collect::<Result<_>>()?
    } else {
        estimate_union_measure(cfg, workers)?.into_iter().map(|p| p.1).collect()
    };
    let mut anomalies = Vec::new();
    let rows: Vec<BcRow> = grid
        .iter()
        .zip(bounds)
        .zip(unions)
        .map(|((&q, b), union)| {
            if let Some(b) = b {
                let slack = 3.0 * union.ci_width() + 1e-12;
                if b.bound > union.value + slack {
                    anomalies.push(format!(
                        "q={q}: bound {} exceeds union {} + 3·CI width",
                        b.bound, union.value
                    ));
                }
            }
            BcRow {
                q,
                bound: b.map(|b| b.bound),
                bound_low: b.map(|b| b.low),
                bound_high: b.map(|b| b.high),
                union,
            }
        })
        .collect();
    let (sumcon, _) = sumcon_band(&cfg.family, cfg.n, cfg.mode, cfg.coprime, &grid)?;
    Ok(BcEvidence {
        pairs: source,
        rows,
        sumcon,
        anomalies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PadicRow {
    pub alpha: Vec<f64>,
    /// Cumulative counts at each checkpoint.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PadicReport {
    pub checkpoints: Vec<u64>,
    pub rows: Vec<PadicRow>,
    /// `Σ_{q<=Qc} ψ(q) (ln q)^(n-1) / ∏ f_i(|q|_{p_i})` at each checkpoint.
    pub partial_sums: Vec<f64>,
}

/// Counts of `q` in `[q0, Qc]` with `∏ ‖q α_i‖ <= ψ(q) / ∏ f_i(|q|_{p_i})`
/// (non-strict) at `samples` random points `α`.
pub fn run_padic(p: &PadicConfig, workers: usize) -> Result<PadicReport> {
    let cfg = &p.experiment;
    cfg.validate()?;
    let weighted = p.weighted_family()?;
    let grid = cfg.checkpoints();
    let stream = PointStream::new(cfg.seed);
    let n = cfg.n as usize;
    let rows = with_pool(workers, || {
        (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let alpha = stream.point(i, n);
                let counts = padic_counts(&alpha, &weighted, cfg, &grid);
                PadicRow { alpha, counts }
            })
            .collect::<Vec<_>>()
    })?;
    let partial_sums = partial_sums(&weighted, SumCriterion::new(CriterionKind::LogWeighted, cfg.n)?, &grid)?;
    Ok(PadicReport {
        checkpoints: grid,
        rows,
        partial_sums,
    })
}

fn padic_counts(alpha: &[f64], f: &ApproxFunction, cfg: &ExperimentConfig, grid: &[u64]) -> Vec<u64> {
    if cfg.q0 == 1 {
        return solution_counts(alpha, f, grid, cfg.mode, cfg.coprime, Inequality::NonStrict);
    }
    let below = solution_counts(alpha, f, &[cfg.q0 - 1], cfg.mode, cfg.coprime, Inequality::NonStrict)[0];
    solution_counts(alpha, f, grid, cfg.mode, cfg.coprime, Inequality::NonStrict)
        .into_iter()
        .map(|c| c - below)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::WeightFn;

    fn small(family: ApproxFunction, n: u32, coprime: bool) -> ExperimentConfig {
        ExperimentConfig {
            family,
            n,
            mode: Mode::Product,
            coprime,
            q0: 1,
            q: 64,
            samples: 2000,
            seed: 9,
            q_grid: vec![4, 16, 64],
        }
    }

    #[test]
    fn demo_battery_is_valid() {
        let b = Battery::theorem2_demo();
        b.validate().unwrap();
        assert_eq!(b.name, "theorem2-demo");
    }

    #[test]
    fn battery_rejects_unbacked_expectations() {
        let mut b = Battery::theorem2_demo();
        b.entries[1].justification = Some(Verdict::KnownConvergent);
        assert!(matches!(b.validate(), Err(Error::Config { field, .. }) if field == "entries[1].justification"));
        let mut b = Battery::theorem2_demo();
        b.entries[3].expect = Expectation::ExpectFull;
        assert!(b.validate().is_err());
        let mut b = Battery::theorem2_demo();
        b.entries[0].config.family = ApproxFunction::table(vec![0.0]).unwrap();
        assert!(b.validate().is_err());
        b.entries[0].expect = Expectation::Exploratory;
        b.validate().unwrap();
    }

    #[test]
    fn zero_family_is_null_trending() {
        let b = Battery {
            name: "z".into(),
            threshold_hi: 0.95,
            threshold_lo: 0.05,
            entries: vec![BatteryEntry {
                label: "zero".into(),
                expect: Expectation::ExpectNull,
                justification: Some(Verdict::KnownConvergent),
                config: small(ApproxFunction::zero(), 2, false),
            }],
        };
        let out = run_dichotomy_scan(&b, 2).unwrap();
        assert_eq!(out[0].trend, Trend::NullTrending);
        assert!(out[0].meets_expectation);
        assert!(out[0].checkpoints.iter().all(|c| c.1.value == 0.0 && c.1.ci_width() == 0.0));
        let empty = Battery { entries: Vec::new(), ..b };
        assert!(run_dichotomy_scan(&empty, 1).unwrap().is_empty());
    }

    #[test]
    fn bc_evidence_zero_is_vacuous() {
        let ev = run_bc_evidence(&small(ApproxFunction::zero(), 2, false), PairChoice::Independence, 1).unwrap();
        assert!(ev.rows.is_empty() && ev.anomalies.is_empty());
    }

    #[test]
    fn bc_evidence_exact_one_dimensional() {
        let f = ApproxFunction::power_log(0.25, 1.0, 0.0).unwrap();
        let ev = run_bc_evidence(&small(f, 1, true), PairChoice::Exact, 1).unwrap();
        assert!(ev.anomalies.is_empty());
        for r in &ev.rows {
            let b = r.bound.unwrap();
            assert!(b > 0.0 && b <= r.union.value + 1e-12);
        }
        assert!(run_bc_evidence(&small(ApproxFunction::constant(0.1).unwrap(), 2, true), PairChoice::Exact, 1).is_err());
    }

    #[test]
    fn bc_evidence_sampled_pairs() {
        let f = ApproxFunction::power_log(0.25, 1.0, 0.0).unwrap();
        let mut cfg = small(f, 2, false);
        cfg.q = 32;
        cfg.q_grid = vec![8, 32];
        let ev = run_bc_evidence(&cfg, PairChoice::MonteCarlo(SampledPairs { samples: 4000, seed: 1 }), 2).unwrap();
        assert!(ev.anomalies.is_empty(), "{:?}", ev.anomalies);
        assert_eq!(ev.rows.len(), 2);
    }

    #[test]
    fn padic_unit_weights_match_plain_counts() {
        let f = ApproxFunction::power_log(1.0, 1.0, 0.0).unwrap();
        let cfg = small(f.clone(), 1, false);
        let p = PadicConfig {
            experiment: cfg.clone(),
            primes: vec![3],
            weights: vec![WeightFn::Constant { c: 1.0 }],
        };
        let rep = run_padic(&p, 2).unwrap();
        assert_eq!(rep.rows.len(), 2000);
        for row in rep.rows.iter().take(50) {
            let plain = solution_counts(&row.alpha, &f, &cfg.q_grid, Mode::Product, false, Inequality::NonStrict);
            assert_eq!(row.counts, plain);
        }
        let zero = PadicConfig {
            experiment: small(ApproxFunction::zero(), 1, false),
            ..p
        };
        assert!(run_padic(&zero, 1).unwrap().rows.iter().all(|r| r.counts.iter().all(|&c| c == 0)));
    }

    #[test]
    fn padic_counts_grow_with_q() {
        let p = PadicConfig {
            experiment: small(ApproxFunction::power_log(1.0, 1.0, 0.0).unwrap(), 1, false),
            primes: vec![2],
            weights: vec![WeightFn::Identity],
        };
        let rep = run_padic(&p, 1).unwrap();
        assert!(rep.partial_sums.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.rows.iter().all(|r| r.counts.windows(2).all(|w| w[0] <= w[1])));
        let (a, b) = (rep.rows[0].counts.clone(), run_padic(&p, 4).unwrap().rows[0].counts.clone());
        assert_eq!(a, b);
    }

    #[test]
    fn sumcon_band_small_grid() {
        let f = ApproxFunction::power_log(0.25, 1.0, 0.0).unwrap();
        let (rows, band) = sumcon_band(&f, 2, Mode::Product, true, &[1, 16, 100, 1000]).unwrap();
        assert_eq!(rows[0].1, None);
        let band = band.unwrap();
        assert!(band.low > 0.0 && band.factor() < 10.0);
    }
}
