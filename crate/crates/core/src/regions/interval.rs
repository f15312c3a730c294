use std::cmp::Ordering;

use crate::scalar::Coord;

/// Sorted, pairwise disjoint closed subintervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion<T> {
    intervals: Vec<(T, T)>,
}

impl<T: Coord> Default for IntervalUnion<T> {
    fn default() -> Self {
        Self::empty()
    }
}

fn cmp<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

impl<T: Coord> IntervalUnion<T> {
    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
        }
    }

    /// Clips every `[a, b]` to `[0, 1]`, drops empty pieces, sorts and merges
    /// overlaps (and gaps up to [`Coord::merge_slack`]).
    pub fn from_intervals<I: IntoIterator<Item = (T, T)>>(raw: I) -> Self {
        let zero = T::zero();
        let one = T::one();
        let mut v: Vec<(T, T)> = raw
            .into_iter()
            .filter_map(|(a, b)| {
                let a = if a < zero { zero.clone() } else { a };
                let b = if b > one { one.clone() } else { b };
                (a < b).then_some((a, b))
            })
            .collect();
        v.sort_by(|x, y| cmp(&x.0, &y.0));
        Self::merge_sorted(v)
    }

    fn merge_sorted(v: Vec<(T, T)>) -> Self {
        let slack = T::merge_slack();
        let mut out: Vec<(T, T)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1.clone() + slack.clone() => {
                    if b > last.1 {
                        last.1 = b;
                    }
                }
                _ => out.push((a, b)),
            }
        }
        Self { intervals: out }
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> T {
        self.intervals
            .iter()
            .fold(T::zero(), |acc, (a, b)| acc + (b.clone() - a.clone()))
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let take_left = j >= other.len()
                || (i < self.len() && self.intervals[i].0 <= other.intervals[j].0);
            if take_left {
                v.push(self.intervals[i].clone());
                i += 1;
            } else {
                v.push(other.intervals[j].clone());
                j += 1;
            }
        }
        Self::merge_sorted(v)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.len() && j < other.len() {
            let (a0, a1) = &self.intervals[i];
            let (b0, b1) = &other.intervals[j];
            let lo = if a0 > b0 { a0 } else { b0 };
            let hi = if a1 < b1 { a1 } else { b1 };
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { intervals: out }
    }

    pub fn intersection_measure(&self, other: &Self) -> T {
        self.intersection(other).measure()
    }

    pub fn contains(&self, x: &T) -> bool {
        let idx = self.intervals.partition_point(|(a, _)| a <= x);
        idx > 0 && *x <= self.intervals[idx - 1].1
    }
}
