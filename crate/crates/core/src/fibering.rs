//! Cross fibering principle on finite probability spaces.
//!
//! `S ⊂ X × Y` is null or full iff μ-almost every fiber `S_x` is ν-trivial
//! and ν-almost every fiber `S^y` is μ-trivial. With finitely many atoms
//! "almost every" means "up to zero-weight atoms", and every comparison here
//! is exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Exact;

/// Atoms `0..len` with non-negative weights summing to exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpace<W> {
    weights: Vec<W>,
}

impl<W: Exact> DiscreteSpace<W> {
    pub fn new(weights: Vec<W>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Validation("a probability space needs at least one atom".into()));
        }
        if weights.iter().any(|w| *w < W::zero()) {
            return Err(Error::Validation("atom weights must be non-negative".into()));
        }
        let total = weights.iter().cloned().fold(W::zero(), |a, b| a + b);
        if total != W::one() {
            return Err(Error::Validation(format!("atom weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        let mut kw = W::zero();
        for _ in 0..k {
            kw = kw + W::one();
        }
        if k == 0 {
            return Err(Error::Validation("a probability space needs at least one atom".into()));
        }
        Self::new(vec![W::one() / kw; k])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[W] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> Result<&W> {
        self.weights.get(atom).ok_or(Error::UnknownAtom(atom))
    }

    /// Measure of the atoms selected by `set`.
    pub fn measure(&self, set: &[bool]) -> W {
        self.weights
            .iter()
            .zip(set)
            .filter(|(_, &m)| m)
            .fold(W::zero(), |a, (w, _)| a + w.clone())
    }

    pub fn triviality(&self, set: &[bool]) -> Triviality<W> {
        Triviality::classify(self.measure(set))
    }
}

/// Null / full / neither, with the exact measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Triviality<W> {
    Null(W),
    Full(W),
    Nontrivial(W),
}

impl<W: Exact> Triviality<W> {
    pub fn classify(measure: W) -> Self {
        if measure == W::zero() {
            Self::Null(measure)
        } else if measure == W::one() {
            Self::Full(measure)
        } else {
            Self::Nontrivial(measure)
        }
    }

    pub fn is_trivial(&self) -> bool {
        !matches!(self, Self::Nontrivial(_))
    }

    pub fn measure(&self) -> &W {
        match self {
            Self::Null(m) | Self::Full(m) | Self::Nontrivial(m) => m,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Null(_) => "null",
            Self::Full(_) => "full",
            Self::Nontrivial(_) => "nontrivial",
        }
    }
}

/// `S ⊂ X × Y` as a membership matrix indexed by `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet<W> {
    x: DiscreteSpace<W>,
    y: DiscreteSpace<W>,
    member: Vec<Vec<bool>>,
}

impl<W: Exact> ProductSet<W> {
    pub fn new(x: DiscreteSpace<W>, y: DiscreteSpace<W>, member: Vec<Vec<bool>>) -> Result<Self> {
        if member.len() != x.len() || member.iter().any(|row| row.len() != y.len()) {
            return Err(Error::Validation(format!(
                "membership matrix must be {} x {}",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { x, y, member })
    }

    /// Subset number `bits` of `X × Y`: bit `i * |Y| + j` selects `(i, j)`.
    pub fn from_bits(x: DiscreteSpace<W>, y: DiscreteSpace<W>, bits: u64) -> Result<Self> {
        let (kx, ky) = (x.len(), y.len());
        if kx * ky > 63 {
            return Err(Error::Domain("bit encoding limited to 63 cells".into()));
        }
        let member = (0..kx)
            .map(|i| (0..ky).map(|j| bits >> (i * ky + j) & 1 == 1).collect())
            .collect();
        Self::new(x, y, member)
    }

    pub fn x_space(&self) -> &DiscreteSpace<W> {
        &self.x
    }

    pub fn y_space(&self) -> &DiscreteSpace<W> {
        &self.y
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.member[x][y]
    }

    /// `S_x = {y : (x, y) ∈ S}`.
    pub fn fiber_x(&self, x: usize) -> Result<Vec<bool>> {
        self.member.get(x).cloned().ok_or(Error::UnknownAtom(x))
    }

    /// `S^y = {x : (x, y) ∈ S}`.
    pub fn fiber_y(&self, y: usize) -> Result<Vec<bool>> {
        if y >= self.y.len() {
            return Err(Error::UnknownAtom(y));
        }
        Ok(self.member.iter().map(|row| row[y]).collect())
    }

    fn fibers_x(&self) -> Vec<W> {
        self.member.iter().map(|row| self.y.measure(row)).collect()
    }

    fn fibers_y(&self) -> Vec<W> {
        (0..self.y.len())
            .map(|j| {
                let col: Vec<bool> = self.member.iter().map(|row| row[j]).collect();
                self.x.measure(&col)
            })
            .collect()
    }

    /// `∫ ν(S_x) dμ` and `∫ μ(S^y) dν`.
    pub fn iterated_measures(&self) -> (W, W) {
        let by_x = integrate(self.x.weights(), &self.fibers_x());
        let by_y = integrate(self.y.weights(), &self.fibers_y());
        (by_x, by_y)
    }

    /// `(μ × ν)(S)`; both iteration orders must agree.
    pub fn product_measure(&self) -> Result<W> {
        let (by_x, by_y) = self.iterated_measures();
        if by_x != by_y {
            return Err(Error::Validation(format!(
                "iterated integrals disagree: {by_x} vs {by_y}"
            )));
        }
        Ok(by_x)
    }

    pub fn cross_fibering_check(&self) -> Result<FiberReport<W>> {
        let left = Triviality::classify(self.product_measure()?);
        let trivial_weight = |weights: &[W], fibers: Vec<W>| {
            weights
                .iter()
                .zip(fibers)
                .filter(|(_, m)| Triviality::classify(m.clone()).is_trivial())
                .fold(W::zero(), |a, (w, _)| a + w.clone())
        };
        let right_x = trivial_weight(self.x.weights(), self.fibers_x());
        let right_y = trivial_weight(self.y.weights(), self.fibers_y());
        let right = right_x == W::one() && right_y == W::one();
        Ok(FiberReport {
            equivalence_holds: left.is_trivial() == right,
            left,
            right_x,
            right_y,
        })
    }

    /// Partition of atoms by fiber triviality, with `(μ×ν)(S ∩ M)` for
    /// `M = X0 × Y1` evaluated through both orders.
    pub fn decompose(&self) -> Decomposition<W> {
        let split = |fibers: Vec<W>| {
            let mut classes = (Vec::new(), Vec::new(), Vec::new());
            for (i, m) in fibers.into_iter().enumerate() {
                match Triviality::classify(m) {
                    Triviality::Null(_) => classes.0.push(i),
                    Triviality::Full(_) => classes.1.push(i),
                    Triviality::Nontrivial(_) => classes.2.push(i),
                }
            }
            classes
        };
        let (x0, x1, xnt) = split(self.fibers_x());
        let (y0, y1, ynt) = split(self.fibers_y());
        // ∫ μ(S^y ∩ X0) χ_{Y1}(y) dν
        let via_y = y1.iter().fold(W::zero(), |acc, &j| {
            let inner = x0
                .iter()
                .filter(|&&i| self.member[i][j])
                .fold(W::zero(), |a, &i| a + self.x.weights[i].clone());
            acc + self.y.weights[j].clone() * inner
        });
        // ∫ ν(S_x ∩ Y1) χ_{X0}(x) dμ
        let via_x = x0.iter().fold(W::zero(), |acc, &i| {
            let inner = y1
                .iter()
                .filter(|&&j| self.member[i][j])
                .fold(W::zero(), |a, &j| a + self.y.weights[j].clone());
            acc + self.x.weights[i].clone() * inner
        });
        let mass = |space: &DiscreteSpace<W>, idx: &[usize]| {
            idx.iter().fold(W::zero(), |a, &i| a + space.weights[i].clone())
        };
        let rectangle = mass(&self.x, &x0) * mass(&self.y, &y1);
        Decomposition {
            four_classes_positive: [(&self.x, &x0), (&self.x, &x1), (&self.y, &y0), (&self.y, &y1)]
                .iter()
                .all(|(s, idx)| mass(s, idx) > W::zero()),
            all_fibers_trivial: xnt.is_empty() && ynt.is_empty(),
            x0,
            x1,
            xnt,
            y0,
            y1,
            ynt,
            via_y,
            via_x,
            rectangle,
        }
    }
}

fn integrate<W: Exact>(weights: &[W], values: &[W]) -> W {
    weights
        .iter()
        .zip(values)
        .fold(W::zero(), |a, (w, v)| a + w.clone() * v.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberReport<W> {
    pub left: Triviality<W>,
    /// μ-measure of atoms whose fiber `S_x` is ν-trivial.
    pub right_x: W,
    /// ν-measure of atoms whose fiber `S^y` is μ-trivial.
    pub right_y: W,
    pub equivalence_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<W> {
    pub x0: Vec<usize>,
    pub x1: Vec<usize>,
    pub xnt: Vec<usize>,
    pub y0: Vec<usize>,
    pub y1: Vec<usize>,
    pub ynt: Vec<usize>,
    /// `(μ×ν)(S ∩ M)` integrating `y` last.
    pub via_y: W,
    /// `(μ×ν)(S ∩ M)` integrating `x` last.
    pub via_x: W,
    /// `μ(X0) ν(Y1)`, the value `via_y` takes when every fiber is trivial.
    pub rectangle: W,
    pub four_classes_positive: bool,
    pub all_fibers_trivial: bool,
}

impl<W: Exact> Decomposition<W> {
    pub fn evaluations_agree(&self) -> bool {
        self.via_x == self.via_y
    }
}

/// Tallies over every subset of `X × Y`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExhaustiveSummary {
    pub subsets: u64,
    pub trivial: u64,
    pub equivalence_failures: u64,
    pub fubini_failures: u64,
    pub decomposition_mismatches: u64,
    /// Subsets with all fibers trivial and X0, X1, Y0, Y1 all of positive
    /// measure; the proof rules these out.
    pub impossible_configurations: u64,
}

impl ExhaustiveSummary {
    fn merge(self, o: Self) -> Self {
        Self {
            subsets: self.subsets + o.subsets,
            trivial: self.trivial + o.trivial,
            equivalence_failures: self.equivalence_failures + o.equivalence_failures,
            fubini_failures: self.fubini_failures + o.fubini_failures,
            decomposition_mismatches: self.decomposition_mismatches + o.decomposition_mismatches,
            impossible_configurations: self.impossible_configurations + o.impossible_configurations,
        }
    }

    pub fn all_hold(&self) -> bool {
        self.equivalence_failures == 0
            && self.fubini_failures == 0
            && self.decomposition_mismatches == 0
            && self.impossible_configurations == 0
    }
}

/// Check every subset of `X × Y` (at most 20 cells).
pub fn exhaustive_check<W: Exact>(x: &DiscreteSpace<W>, y: &DiscreteSpace<W>) -> Result<ExhaustiveSummary> {
    let cells = x.len() * y.len();
    if cells > 20 {
        return Err(Error::Resource {
            what: "product cells for exhaustive enumeration",
            needed: cells as u128,
            budget: 20,
        });
    }
    let summary = (0..1u64 << cells)
        .into_par_iter()
        .map(|bits| -> Result<ExhaustiveSummary> {
            let s = ProductSet::from_bits(x.clone(), y.clone(), bits)?;
            let (by_x, by_y) = s.iterated_measures();
            let report = s.cross_fibering_check()?;
            let d = s.decompose();
            Ok(ExhaustiveSummary {
                subsets: 1,
                trivial: report.left.is_trivial() as u64,
                equivalence_failures: !report.equivalence_holds as u64,
                fubini_failures: (by_x != by_y) as u64,
                decomposition_mismatches: !d.evaluations_agree() as u64,
                impossible_configurations: (d.four_classes_positive && d.all_fibers_trivial) as u64,
            })
        })
        .try_reduce(ExhaustiveSummary::default, |a, b| Ok(a.merge(b)))?;
    Ok(summary)
}

/// Random rational probability vector with denominators below `max_den`;
/// with `allow_zero`, atoms are zeroed at random (at least one stays
/// positive).
pub fn random_rational_weights<R: Rng>(k: usize, max_den: i64, allow_zero: bool, rng: &mut R) -> Result<DiscreteSpace<BigRational>> {
    if k == 0 || max_den < 1 {
        return Err(Error::Domain("need k >= 1 and max_den >= 1".into()));
    }
    let mut raw: Vec<BigRational> = (0..k)
        .map(|_| {
            let den = rng.gen_range(1..=max_den);
            let num = rng.gen_range(1..=den);
            BigRational::new(BigInt::from(num), BigInt::from(den))
        })
        .collect();
    if allow_zero {
        let keep = rng.gen_range(0..k);
        for (i, w) in raw.iter_mut().enumerate() {
            if i != keep && rng.gen_bool(0.3) {
                *w = BigRational::from_integer(BigInt::from(0));
            }
        }
    }
    let total = raw.iter().fold(BigRational::from_integer(BigInt::from(0)), |a, b| a + b);
    DiscreteSpace::new(raw.into_iter().map(|w| w / &total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Zero};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn uniform(k: usize) -> DiscreteSpace<BigRational> {
        DiscreteSpace::uniform(k).unwrap()
    }

    fn diagonal2() -> ProductSet<BigRational> {
        ProductSet::new(uniform(2), uniform(2), vec![vec![true, false], vec![false, true]]).unwrap()
    }

    #[test]
    fn space_validation() {
        assert!(DiscreteSpace::new(vec![r(1, 2), r(1, 3)]).is_err());
        assert!(DiscreteSpace::new(vec![r(3, 2), r(-1, 2)]).is_err());
        assert!(DiscreteSpace::new(vec![r(1, 1), r(0, 1)]).is_ok());
        assert!(ProductSet::new(uniform(2), uniform(3), vec![vec![true; 3]]).is_err());
    }

    #[test]
    fn fibers() {
        let full = ProductSet::new(uniform(2), uniform(3), vec![vec![true; 3]; 2]).unwrap();
        assert_eq!(full.fiber_x(1).unwrap(), vec![true; 3]);
        let empty = ProductSet::new(uniform(2), uniform(3), vec![vec![false; 3]; 2]).unwrap();
        assert_eq!(empty.fiber_x(0).unwrap(), vec![false; 3]);
        assert_eq!(diagonal2().fiber_x(0).unwrap(), vec![true, false]);
        assert_eq!(diagonal2().fiber_y(1).unwrap(), vec![false, true]);
        assert_eq!(diagonal2().fiber_x(2), Err(Error::UnknownAtom(2)));
        assert_eq!(diagonal2().fiber_y(5), Err(Error::UnknownAtom(5)));
    }

    #[test]
    fn product_measure_examples() {
        let x = DiscreteSpace::new(vec![r(1, 6), r(1, 3), r(1, 2)]).unwrap();
        let y = DiscreteSpace::new(vec![r(1, 4), r(3, 4)]).unwrap();
        // rectangle {0, 2} × {1}
        let s = ProductSet::new(x, y, vec![vec![false, true], vec![false, false], vec![false, true]]).unwrap();
        assert_eq!(s.product_measure().unwrap(), r(2, 3) * r(3, 4));
        assert_eq!(diagonal2().product_measure().unwrap(), r(1, 2));
        let empty = ProductSet::new(uniform(2), uniform(2), vec![vec![false; 2]; 2]).unwrap();
        assert!(empty.product_measure().unwrap().is_zero());
    }

    #[test]
    fn cross_fibering_examples() {
        let full = ProductSet::new(uniform(2), uniform(2), vec![vec![true; 2]; 2]).unwrap();
        let rep = full.cross_fibering_check().unwrap();
        assert!(matches!(rep.left, Triviality::Full(_)));
        assert!(rep.right_x.is_one() && rep.right_y.is_one() && rep.equivalence_holds);

        let rep = diagonal2().cross_fibering_check().unwrap();
        assert_eq!(rep.left, Triviality::Nontrivial(r(1, 2)));
        assert!(rep.right_x.is_zero() && rep.right_y.is_zero() && rep.equivalence_holds);

        // zero-weight atom b carries a full fiber
        let x = DiscreteSpace::new(vec![r(1, 1), r(0, 1)]).unwrap();
        let s = ProductSet::new(x, uniform(2), vec![vec![false, false], vec![true, true]]).unwrap();
        let rep = s.cross_fibering_check().unwrap();
        assert!(matches!(rep.left, Triviality::Null(_)));
        assert!(rep.right_x.is_one() && rep.right_y.is_one() && rep.equivalence_holds);
    }

    #[test]
    fn one_sided_triviality_is_not_enough() {
        // every S_x is trivial (rows are all-or-nothing) but S^y is not
        let s = ProductSet::new(uniform(2), uniform(2), vec![vec![true, true], vec![false, false]]).unwrap();
        let rep = s.cross_fibering_check().unwrap();
        assert!(rep.right_x.is_one());
        assert!(rep.right_y < BigRational::one());
        assert_eq!(rep.left, Triviality::Nontrivial(r(1, 2)));
        assert!(rep.equivalence_holds);
    }

    #[test]
    fn decompose_examples() {
        let full = ProductSet::new(uniform(2), uniform(2), vec![vec![true; 2]; 2]).unwrap();
        let d = full.decompose();
        assert_eq!((d.x1.len(), d.y1.len(), d.x0.len(), d.y0.len()), (2, 2, 0, 0));
        assert!(d.via_x.is_zero() && d.via_y.is_zero());
        let empty = ProductSet::new(uniform(2), uniform(2), vec![vec![false; 2]; 2]).unwrap();
        let d = empty.decompose();
        assert_eq!((d.x0.len(), d.y0.len(), d.y1.len()), (2, 2, 0));
        assert!(d.via_x.is_zero() && d.via_y.is_zero());
    }

    #[test]
    fn exhaustive_small_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = random_rational_weights(3, 12, true, &mut rng).unwrap();
            let y = random_rational_weights(3, 12, true, &mut rng).unwrap();
            let s = exhaustive_check(&x, &y).unwrap();
            assert_eq!(s.subsets, 512);
            assert!(s.all_hold(), "{s:?}");
            assert!(s.trivial >= 2);
        }
        let big = uniform(5);
        assert!(exhaustive_check(&big, &big).is_err());
    }

    #[test]
    fn random_rectangular_sets_fubini() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=12usize {
            let x = random_rational_weights(k, 50, true, &mut rng).unwrap();
            let y = random_rational_weights(13 - k, 50, true, &mut rng).unwrap();
            let member = (0..k).map(|_| (0..13 - k).map(|_| rng.gen_bool(0.5)).collect()).collect();
            let s = ProductSet::new(x, y, member).unwrap();
            let (a, b) = s.iterated_measures();
            assert_eq!(a, b);
            assert!(s.cross_fibering_check().unwrap().equivalence_holds);
            assert!(s.decompose().evaluations_agree());
        }
    }
}
