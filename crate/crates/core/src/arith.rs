//! Number-theoretic kernel: totients, distances to (coprime) integers,
//! coprime residue gaps and p-adic absolute values.

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Euler's totient for every `1 <= q <= limit`, built by a linear sieve.
///
/// Also keeps the least prime factor of every entry, which makes radicals
/// and factorizations of in-range arguments O(log q).
#[derive(Debug, Clone)]
pub struct PhiTable {
    phi: Vec<u32>,
    lpf: Vec<u32>,
}

impl PhiTable {
    pub fn new(limit: u64) -> Result<Self> {
        if limit == 0 {
            return Err(Error::Domain("PhiTable limit must be >= 1".into()));
        }
        if limit > u32::MAX as u64 {
            return Err(Error::Resource {
                what: "totient table",
                needed: limit as u128,
                budget: u32::MAX as u128,
            });
        }
        let n = limit as usize;
        let mut phi = vec![0u32; n + 1];
        let mut lpf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        phi[1] = 1;
        lpf[1] = 1;
        for i in 2..=n {
            if lpf[i] == 0 {
                lpf[i] = i as u32;
                phi[i] = i as u32 - 1;
                primes.push(i as u32);
            }
            for &p in &primes {
                let ip = i * p as usize;
                if p > lpf[i] || ip > n {
                    break;
                }
                lpf[ip] = p;
                if p == lpf[i] {
                    phi[ip] = phi[i] * p;
                    break;
                }
                phi[ip] = phi[i] * (p - 1);
            }
        }
        Ok(Self { phi, lpf })
    }

    pub fn limit(&self) -> u64 {
        (self.phi.len() - 1) as u64
    }

    /// φ(q), from the table when in range and by trial division otherwise.
    pub fn phi(&self, q: u64) -> Result<u64> {
        if q == 0 {
            return Err(Error::Domain("euler_phi(0) is undefined".into()));
        }
        match self.phi.get(q as usize) {
            Some(&v) if q <= self.limit() => Ok(v as u64),
            _ => euler_phi(q),
        }
    }

    /// Table values `φ(1..=limit)`.
    pub fn values(&self) -> &[u32] {
        &self.phi[1..]
    }

    /// Distinct prime factors of `q`, ascending.
    pub fn prime_factors(&self, q: u64) -> Vec<u64> {
        if q == 0 || q > self.limit() {
            return prime_factors(q);
        }
        let mut out = Vec::new();
        let mut m = q as usize;
        while m > 1 {
            let p = self.lpf[m] as usize;
            out.push(p as u64);
            while m % p == 0 {
                m /= p;
            }
        }
        out
    }
}

/// Distinct prime factors by trial division, ascending. Empty for q <= 1.
pub fn prime_factors(mut q: u64) -> Vec<u64> {
    let mut out = Vec::new();
    if q <= 1 {
        return out;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= q {
        if q % d == 0 {
            out.push(d);
            while q % d == 0 {
                q /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if q > 1 {
        out.push(q);
    }
    out
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && prime_factors(p) == [p]
}

/// Euler's totient by trial-division factorization.
pub fn euler_phi(q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::Domain("euler_phi(0) is undefined".into()));
    }
    Ok(prime_factors(q)
        .into_iter()
        .fold(q, |acc, p| acc / p * (p - 1)))
}

/// Product of the distinct primes dividing `q`.
pub fn radical(q: u64) -> u64 {
    prime_factors(q).into_iter().product::<u64>().max(1)
}

/// `‖qx‖`: distance from `qx` to the nearest integer, in `[0, 1/2]`.
pub fn dist_nearest<T: Real>(q: u64, x: T) -> T {
    let y = T::from_u64_lossy(q) * x;
    (y - y.round()).abs()
}

/// `‖qx‖′`: distance from `qx` to the nearest integer coprime to `q`.
///
/// Can exceed 1/2 (e.g. `q = 4, x = 1/2` gives 1).
pub fn dist_nearest_coprime<T: Real>(q: u64, x: T) -> T {
    let y = T::from_u64_lossy(q) * x;
    coprime_distance(y, q)
}

/// Distance from real `y` to the nearest integer `p` with `gcd(p, m) = 1`.
///
/// Walks down from `floor(y)` and up from `floor(y) + 1`; each walk stops at
/// the first coprime integer, which always occurs within `m` steps.
pub(crate) fn coprime_distance<T: Real>(y: T, m: u64) -> T {
    if m <= 1 {
        return (y - y.round()).abs();
    }
    let base = y.floor();
    let start = base.to_i64().unwrap_or(0);
    let limit = m as i64;
    let mut best = T::infinity();
    for k in 0..limit {
        let p = start - k;
        if p.unsigned_abs().gcd(&m) == 1 {
            best = y - T::from_i64(p).unwrap_or(base);
            break;
        }
    }
    for k in 0..limit {
        let p = start + 1 + k;
        if p.unsigned_abs().gcd(&m) == 1 {
            let d = T::from_i64(p).unwrap_or(base) - y;
            if d < best {
                best = d;
            }
            break;
        }
    }
    best.abs()
}

/// Residues `r in [0, q)` coprime to `q`, each with the cyclic gap to the
/// next coprime residue. Gaps sum to `q`; `q = 1` gives `[(0, 1)]`.
pub fn coprime_gaps(q: u64) -> Result<Vec<(u64, u64)>> {
    if q == 0 {
        return Err(Error::Domain("coprime_gaps(0) is undefined".into()));
    }
    let residues: Vec<u64> = (0..q).filter(|r| r.gcd(&q) == 1).collect();
    let len = residues.len();
    Ok(residues
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let next = if i + 1 < len { residues[i + 1] } else { residues[0] + q };
            (r, next - r)
        })
        .collect())
}

/// Multiset of cyclic gaps between consecutive integers coprime to `q`.
///
/// Same content as a histogram of [`coprime_gaps`], but computed without
/// touching all `q` residues: the gap structure of `q` is that of its radical
/// repeated `q / rad(q)` times, and the radical's structure is obtained from
/// `rad(q) / P` (P the largest prime factor) by lifting `P` periods and
/// deleting the multiples of `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapHistogram {
    q: u64,
    counts: BTreeMap<u64, u64>,
}

impl GapHistogram {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Domain("gap histogram of 0 is undefined".into()));
        }
        Ok(Self::from_primes(q, &prime_factors(q)))
    }

    /// Like [`GapHistogram::new`], factoring through a prebuilt table.
    pub fn with_table(q: u64, table: &PhiTable) -> Result<Self> {
        if q == 0 {
            return Err(Error::Domain("gap histogram of 0 is undefined".into()));
        }
        Ok(Self::from_primes(q, &table.prime_factors(q)))
    }

    fn from_primes(q: u64, primes: &[u64]) -> Self {
        let rad: u64 = primes.iter().product::<u64>().max(1);
        let mut counts = squarefree_gaps(primes);
        let mult = q / rad;
        for c in counts.values_mut() {
            *c *= mult;
        }
        Self { q, counts }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// `(gap, count)` pairs in ascending gap order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&g, &c)| (g, c))
    }

    /// Number of coprime residues, i.e. φ(q).
    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn max_gap(&self) -> u64 {
        self.counts.keys().next_back().copied().unwrap_or(1)
    }
}

fn squarefree_gaps(primes: &[u64]) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    let Some((&big, rest)) = primes.split_last() else {
        out.insert(1, 1);
        return out;
    };
    let s: u64 = rest.iter().product::<u64>().max(1);
    // coprime residues of s by sieve
    let mut composite = vec![false; s as usize];
    for &p in rest {
        let mut k = 0;
        while k < s {
            composite[k as usize] = true;
            k += p;
        }
    }
    let residues: Vec<u64> = if s == 1 {
        vec![0]
    } else {
        (0..s).filter(|&r| !composite[r as usize]).collect()
    };
    let len = residues.len();
    let gaps: Vec<u64> = (0..len)
        .map(|i| {
            if i + 1 < len {
                residues[i + 1] - residues[i]
            } else {
                residues[0] + s - residues[i]
            }
        })
        .collect();
    for &g in &gaps {
        *out.entry(g).or_insert(0) += big;
    }
    // Each coprime class mod s has exactly one lift divisible by `big`; the
    // lift after it is also divisible iff `big` divides the gap between them.
    let linked: Vec<bool> = gaps.iter().map(|g| g % big == 0).collect();
    let prev = |i: usize| (i + len - 1) % len;
    for start in 0..len {
        if linked[prev(start)] {
            continue;
        }
        let mut merged = gaps[prev(start)];
        let mut removed = vec![gaps[prev(start)]];
        let mut j = start;
        loop {
            merged += gaps[j];
            removed.push(gaps[j]);
            if !linked[j] {
                break;
            }
            j = (j + 1) % len;
        }
        for g in removed {
            let c = out.get_mut(&g).expect("gap present");
            *c -= 1;
            if *c == 0 {
                out.remove(&g);
            }
        }
        *out.entry(merged).or_insert(0) += 1;
    }
    out
}

/// `|q|_p = p^(-v)` where `p^v` exactly divides `q`.
pub fn padic_abs(q: u64, p: u64) -> Result<Ratio<u64>> {
    if q == 0 {
        return Err(Error::Domain("|0|_p is not a positive rational".into()));
    }
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let mut m = q;
    let mut pv = 1u64;
    while m % p == 0 {
        m /= p;
        pv *= p;
    }
    Ok(Ratio::new(1, pv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_phi(q: u64) -> u64 {
        (1..=q).filter(|p| p.gcd(&q) == 1).count() as u64
    }

    /// Brute-force ‖qx‖′ over a wide window of candidate numerators.
    fn brute_coprime(q: u64, x: f64) -> f64 {
        let y = q as f64 * x;
        let c = y.round() as i64;
        (c - 2 * q as i64 - 2..=c + 2 * q as i64 + 2)
            .filter(|p| p.unsigned_abs().gcd(&q) == 1)
            .map(|p| (y - p as f64).abs())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn phi_examples() {
        assert_eq!(euler_phi(1).unwrap(), 1);
        assert_eq!(euler_phi(12).unwrap(), brute_phi(12));
        assert_eq!(euler_phi(12).unwrap(), 4);
        assert_eq!(euler_phi(7).unwrap(), 6);
        assert!(matches!(euler_phi(0), Err(Error::Domain(_))));
    }

    #[test]
    fn table_matches_brute_force_to_ten_thousand() {
        let table = PhiTable::new(10_000).unwrap();
        for q in 1..=10_000u64 {
            assert_eq!(table.phi(q).unwrap(), brute_phi(q), "q = {q}");
        }
        // out of range falls back to factorization
        assert_eq!(table.phi(10_007).unwrap(), 10_006);
        assert_eq!(table.phi(20_000).unwrap(), euler_phi(20_000).unwrap());
        assert!(table.phi(0).is_err());
    }

    #[test]
    fn phi_table_invariants() {
        let table = PhiTable::new(5000).unwrap();
        for q in 1..=5000u64 {
            let v = table.phi(q).unwrap();
            assert!(v >= 1 && v <= q);
            if is_prime(q) {
                assert_eq!(v, q - 1);
            }
        }
        for (a, b) in [(4u64, 9u64), (7, 15), (8, 125), (11, 13)] {
            assert_eq!(
                table.phi(a * b).unwrap(),
                table.phi(a).unwrap() * table.phi(b).unwrap()
            );
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist_nearest(3, 1.0f64 / 3.0), 0.0);
        assert!((dist_nearest(4, 0.49f64) - 0.04).abs() < 1e-12);
        assert_eq!(dist_nearest(1, 0.5f64), 0.5);

        assert!((dist_nearest_coprime(1, 0.3f64) - 0.3).abs() < 1e-15);
        assert_eq!(dist_nearest_coprime(4, 0.5f64), 1.0);
        assert!(dist_nearest_coprime(12, 1.0f64 / 12.0) < 1e-15);
        // f32 path compiles and agrees
        assert!((dist_nearest_coprime(4, 0.5f32) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coprime_distance_matches_window_search() {
        for q in 1..=60u64 {
            for k in 0..=97 {
                let x = k as f64 / 97.0;
                let fast = dist_nearest_coprime(q, x);
                let slow = brute_coprime(q, x);
                assert!((fast - slow).abs() < 1e-12, "q={q} x={x}");
            }
        }
    }

    #[test]
    fn gap_examples() {
        assert_eq!(coprime_gaps(4).unwrap(), vec![(1, 2), (3, 2)]);
        assert_eq!(coprime_gaps(1).unwrap(), vec![(0, 1)]);
        assert_eq!(coprime_gaps(6).unwrap(), vec![(1, 4), (5, 2)]);
        assert!(coprime_gaps(0).is_err());
    }

    #[test]
    fn gap_histogram_matches_enumeration() {
        let table = PhiTable::new(3000).unwrap();
        for q in 1..=3000u64 {
            let mut brute = BTreeMap::new();
            for (_, g) in coprime_gaps(q).unwrap() {
                *brute.entry(g).or_insert(0u64) += 1;
            }
            let fast = GapHistogram::with_table(q, &table).unwrap();
            assert_eq!(fast.counts, brute, "q = {q}");
            assert_eq!(fast.total_count(), table.phi(q).unwrap());
        }
        // primorials have long runs of linked deletions
        for q in [30030u64, 510510, 9699690] {
            let h = GapHistogram::new(q).unwrap();
            assert_eq!(h.total_count(), euler_phi(q).unwrap());
            assert_eq!(h.iter().map(|(g, c)| g * c).sum::<u64>(), q);
        }
        let h = GapHistogram::new(30030).unwrap();
        let mut brute = BTreeMap::new();
        for (_, g) in coprime_gaps(30030).unwrap() {
            *brute.entry(g).or_insert(0u64) += 1;
        }
        assert_eq!(h.counts, brute);
    }

    #[test]
    fn padic_examples() {
        assert_eq!(padic_abs(8, 2).unwrap(), Ratio::new(1, 8));
        assert_eq!(padic_abs(9, 2).unwrap(), Ratio::new(1, 1));
        assert_eq!(padic_abs(12, 3).unwrap(), Ratio::new(1, 3));
        assert_eq!(padic_abs(12, 4), Err(Error::NotPrime(4)));
        assert_eq!(padic_abs(12, 1), Err(Error::NotPrime(1)));
    }

    proptest! {
        #[test]
        fn distance_bounds_and_symmetry(q in 1u64..500, num in 0u32..=1000) {
            let x = num as f64 / 1000.0;
            let d = dist_nearest(q, x);
            let dc = dist_nearest_coprime(q, x);
            prop_assert!((0.0..=0.5).contains(&d));
            prop_assert!(dc + 1e-12 >= d);
            prop_assert!((d - dist_nearest(q, 1.0 - x)).abs() < 1e-9);
            prop_assert!((dc - dist_nearest_coprime(q, 1.0 - x)).abs() < 1e-9);
        }

        #[test]
        fn distance_periodicity_on_rational_grid(q in 1u64..200, a in 0u64..200, k in 0u64..200) {
            // x = a / (200 q): shifting by k/q keeps ‖qx‖ fixed
            let den = 200 * q;
            let x = (a % den) as f64 / den as f64;
            let shifted = ((a + 200 * k) % den) as f64 / den as f64;
            prop_assert!((dist_nearest(q, x) - dist_nearest(q, shifted)).abs() < 1e-9);
        }

        #[test]
        fn gaps_count_phi_and_sum_to_q(q in 1u64..2000) {
            let gaps = coprime_gaps(q).unwrap();
            prop_assert_eq!(gaps.len() as u64, euler_phi(q).unwrap());
            prop_assert_eq!(gaps.iter().map(|g| g.1).sum::<u64>(), q);
        }
    }
}
