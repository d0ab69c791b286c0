use std::fmt;

use crate::error::{invalid, Error, Result};

/// Half-open integer interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    start: i64,
    end: i64,
}

impl Interval {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if end < start {
            return Err(invalid("interval", format!("end {end} < start {start}")));
        }
        Ok(Self { start, end })
    }

    /// `[center - radius, center + radius]`, i.e. `2 * radius + 1` sites.
    pub fn centered(center: i64, radius: u64) -> Self {
        let r = radius as i64;
        Self {
            start: center - r,
            end: center + r + 1,
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    pub fn len(&self) -> u64 {
        (self.end - self.start) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, x: i64) -> bool {
        self.start <= x && x < self.end
    }

    /// Midpoint `(start + end) / 2`, possibly a half-integer.
    pub fn center(&self) -> f64 {
        (self.start as f64 + self.end as f64) / 2.0
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start < end).then_some(Interval { start, end })
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    /// Concentric interval with `factor` times the length.
    pub fn dilate(&self, factor: u64) -> Interval {
        let len = self.len() as i64;
        let extra = (factor as i64 - 1) * len;
        let left = extra / 2;
        Interval {
            start: self.start - left,
            end: self.end + (extra - left),
        }
    }

    pub fn sites(&self) -> std::ops::Range<i64> {
        self.start..self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Dyadic interval `[index * 2^scale, (index + 1) * 2^scale)` on the grid
/// anchored at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicInterval {
    scale: u32,
    index: i64,
}

impl DyadicInterval {
    pub const MAX_SCALE: u32 = 62;

    pub fn new(scale: u32, index: i64) -> Result<Self> {
        if scale > Self::MAX_SCALE {
            return Err(invalid(
                "scale",
                format!("{scale} exceeds {}", Self::MAX_SCALE),
            ));
        }
        let span = 1i128 << scale;
        let lo = index as i128 * span;
        if lo < i64::MIN as i128 || lo + span > i64::MAX as i128 {
            return Err(invalid(
                "index",
                format!("{index} at scale {scale} overflows"),
            ));
        }
        Ok(Self { scale, index })
    }

    /// The dyadic interval of the given scale containing `x`.
    pub fn containing(x: i64, scale: u32) -> Self {
        Self {
            scale,
            index: x.div_euclid(1i64 << scale),
        }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn index(&self) -> i64 {
        self.index
    }

    pub fn start(&self) -> i64 {
        self.index << self.scale
    }

    pub fn end(&self) -> i64 {
        (self.index + 1) << self.scale
    }

    pub fn len(&self) -> u64 {
        1u64 << self.scale
    }

    pub fn interval(&self) -> Interval {
        Interval {
            start: self.start(),
            end: self.end(),
        }
    }

    pub fn contains_point(&self, x: i64) -> bool {
        self.start() <= x && x < self.end()
    }

    /// `true` when `other` is a (not necessarily strict) sub-interval.
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.scale <= self.scale && other.index >> (self.scale - other.scale) == self.index
    }

    pub fn intersects(&self, other: &DyadicInterval) -> bool {
        self.contains(other) || other.contains(self)
    }

    pub fn parent(&self) -> DyadicInterval {
        Self {
            scale: self.scale + 1,
            index: self.index.div_euclid(2),
        }
    }

    pub fn children(&self) -> Option<[DyadicInterval; 2]> {
        (self.scale > 0).then(|| {
            let scale = self.scale - 1;
            [
                Self {
                    scale,
                    index: 2 * self.index,
                },
                Self {
                    scale,
                    index: 2 * self.index + 1,
                },
            ]
        })
    }

    pub fn ancestor_at(&self, scale: u32) -> Option<DyadicInterval> {
        (scale >= self.scale).then(|| Self {
            scale,
            index: self.index >> (scale - self.scale),
        })
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start(), self.end())
    }
}

/// Pairwise disjoint dyadic intervals, kept sorted by left endpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalFamily {
    members: Vec<DyadicInterval>,
}

impl IntervalFamily {
    pub fn new(mut members: Vec<DyadicInterval>) -> Result<Self> {
        members.sort_by_key(|q| (q.start(), q.scale()));
        for pair in members.windows(2) {
            if pair[1].start() < pair[0].end() {
                return Err(Error::OverlappingIntervals(
                    pair[0].start(),
                    pair[0].end(),
                    pair[1].start(),
                    pair[1].end(),
                ));
            }
        }
        Ok(Self { members })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Every dyadic interval of the given scale meeting `window`.
    pub fn grid(scale: u32, window: Interval) -> Self {
        if window.is_empty() {
            return Self::empty();
        }
        let first = DyadicInterval::containing(window.start(), scale).index;
        let last = DyadicInterval::containing(window.end() - 1, scale).index;
        Self {
            members: (first..=last)
                .map(|index| DyadicInterval { scale, index })
                .collect(),
        }
    }

    pub fn members(&self) -> &[DyadicInterval] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DyadicInterval> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index of the member containing `x`.
    pub fn locate(&self, x: i64) -> Option<usize> {
        let idx = self.members.partition_point(|q| q.end() <= x);
        (idx < self.members.len() && self.members[idx].contains_point(x)).then_some(idx)
    }

    pub fn covers(&self, x: i64) -> bool {
        self.locate(x).is_some()
    }

    /// Total number of sites covered.
    pub fn measure(&self) -> u64 {
        self.members.iter().map(DyadicInterval::len).sum()
    }

    /// Sub-family of members satisfying `keep`.
    pub fn filter<F: FnMut(&DyadicInterval) -> bool>(&self, mut keep: F) -> Self {
        Self {
            members: self.members.iter().copied().filter(|q| keep(q)).collect(),
        }
    }
}

impl<'a> IntoIterator for &'a IntervalFamily {
    type Item = &'a DyadicInterval;
    type IntoIter = std::slice::Iter<'a, DyadicInterval>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}
