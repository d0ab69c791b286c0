use std::ops::{Add, Neg, Sub};

use super::interval::Interval;
use crate::error::{invalid, Result};

/// Finitely supported real function on the integers.
///
/// Stored in canonical sparse form: strictly increasing sites, no stored
/// zero. Every absent site is exactly zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatticeFunction {
    sites: Vec<i64>,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn delta(site: i64, height: f64) -> Self {
        Self::from_pairs([(site, height)])
    }

    /// Builds a function from arbitrary `(site, value)` pairs. Repeated sites
    /// are summed in input order; exact zeros are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Self {
        let mut pairs: Vec<(i64, f64)> = pairs.into_iter().collect();
        pairs.sort_by_key(|p| p.0);
        let mut sites = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, v) in pairs {
            if sites.last() == Some(&x) {
                *values.last_mut().unwrap() += v;
            } else {
                sites.push(x);
                values.push(v);
            }
        }
        let mut out = Self { sites, values };
        out.drop_zeros();
        out
    }

    /// Pairs that are already strictly increasing in site; zeros dropped.
    pub(crate) fn from_sorted_unchecked<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Self {
        let (sites, values) = pairs.into_iter().filter(|p| p.1 != 0.0).unzip();
        Self { sites, values }
    }

    /// Interprets `values[i]` as the value at `start + i`.
    pub fn from_dense(start: i64, values: &[f64]) -> Self {
        Self::from_sorted_unchecked(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (start + i as i64, v)),
        )
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let (sites, values) = self
            .sites
            .iter()
            .zip(&self.values)
            .filter(|p| *p.1 != 0.0)
            .map(|(&x, &v)| (x, v))
            .unzip();
        self.sites = sites;
        self.values = values;
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.sites.iter().copied().zip(self.values.iter().copied())
    }

    /// Number of nonzero sites.
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, x: i64) -> f64 {
        match self.sites.binary_search(&x) {
            Ok(i) => self.values[i],
            Err(_) => 0.0,
        }
    }

    /// Smallest interval containing the support.
    pub fn support_hull(&self) -> Option<Interval> {
        match (self.sites.first(), self.sites.last()) {
            (Some(&a), Some(&b)) => Some(Interval::new(a, b + 1).unwrap()),
            _ => None,
        }
    }

    /// Index range of the stored sites inside `iv`.
    pub(crate) fn index_range(&self, iv: &Interval) -> std::ops::Range<usize> {
        let lo = self.sites.partition_point(|&x| x < iv.start());
        let hi = self.sites.partition_point(|&x| x < iv.end());
        lo..hi
    }

    /// `(sum |f|^p)^(1/p)`, or `max |f|` for `p = inf`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid("p", format!("{p} is below 1")));
        }
        if p.is_infinite() {
            return Ok(self.sup_norm());
        }
        if p == 1.0 {
            return Ok(self.l1_norm());
        }
        if p == 2.0 {
            return Ok(self.l2_norm());
        }
        Ok(self
            .values
            .iter()
            .map(|v| v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sum of the values at sites inside `iv`.
    pub fn sum_over(&self, iv: &Interval) -> f64 {
        self.values[self.index_range(iv)].iter().sum()
    }

    pub fn restrict(&self, iv: &Interval) -> Self {
        let r = self.index_range(iv);
        Self {
            sites: self.sites[r.clone()].to_vec(),
            values: self.values[r].to_vec(),
        }
    }

    /// Keeps the sites where `keep(site, value)` holds.
    pub fn filter<F: FnMut(i64, f64) -> bool>(&self, mut keep: F) -> Self {
        Self::from_sorted_unchecked(self.iter().filter(|&(x, v)| keep(x, v)))
    }

    pub fn map_values<F: FnMut(i64, f64) -> f64>(&self, mut op: F) -> Self {
        Self::from_sorted_unchecked(self.iter().map(|(x, v)| (x, op(x, v))))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_values(|_, v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map_values(|_, v| v.abs())
    }

    /// `x -> f(x - k)`.
    pub fn translate(&self, k: i64) -> Self {
        Self {
            sites: self.sites.iter().map(|x| x + k).collect(),
            values: self.values.clone(),
        }
    }

    /// `x -> f(-x)`.
    pub fn reflect(&self) -> Self {
        Self {
            sites: self.sites.iter().rev().map(|x| -x).collect(),
            values: self.values.iter().rev().copied().collect(),
        }
    }

    pub fn positive_part(&self) -> Self {
        self.filter(|_, v| v > 0.0)
    }

    /// `max(-f, 0)`.
    pub fn negative_part(&self) -> Self {
        self.filter(|_, v| v < 0.0).scale(-1.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Dense copy of the values on `window`.
    pub fn to_dense(&self, window: &Interval) -> Vec<f64> {
        let mut out = vec![0.0; window.len() as usize];
        for (x, v) in self.restrict(window).iter() {
            out[(x - window.start()) as usize] = v;
        }
        out
    }

    /// Site-wise combination over the union of supports.
    pub fn zip_with<F: FnMut(f64, f64) -> f64>(&self, other: &Self, mut op: F) -> Self {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let a = self.sites.get(i).copied().unwrap_or(i64::MAX);
            let b = other.sites.get(j).copied().unwrap_or(i64::MAX);
            if a < b {
                out.push((a, op(self.values[i], 0.0)));
                i += 1;
            } else if b < a {
                out.push((b, op(0.0, other.values[j])));
                j += 1;
            } else {
                out.push((a, op(self.values[i], other.values[j])));
                i += 1;
                j += 1;
            }
        }
        Self::from_sorted_unchecked(out)
    }

    /// `(low, high)` with `low = f * 1{|f| < cutoff}` and `high = f - low`.
    pub fn truncate_split(&self, cutoff: f64) -> (Self, Self) {
        let low = self.filter(|_, v| v.abs() < cutoff);
        let high = self.filter(|_, v| v.abs() >= cutoff);
        (low, high)
    }

    /// `f * 1{top/(2a) <= |f| < top/a}` for a dyadic `a`.
    pub fn band(&self, top: f64, a: u64) -> Self {
        let upper = top / a as f64;
        let lower = upper / 2.0;
        self.filter(|_, v| {
            let m = v.abs();
            lower <= m && m < upper
        })
    }

    /// Smallest dyadic `a` for which the bands `1..=a` below `top` exhaust
    /// every nonzero value smaller than `top`.
    pub fn band_count(&self, top: f64) -> u64 {
        let min_pos = self
            .values
            .iter()
            .map(|v| v.abs())
            .filter(|&m| m < top)
            .fold(f64::INFINITY, f64::min);
        if !min_pos.is_finite() {
            return 1;
        }
        let mut a = 1u64;
        while top / (2 * a) as f64 > min_pos && a < 1 << 62 {
            a *= 2;
        }
        a
    }
}

impl Add for &LatticeFunction {
    type Output = LatticeFunction;

    fn add(self, rhs: Self) -> LatticeFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &LatticeFunction {
    type Output = LatticeFunction;

    fn sub(self, rhs: Self) -> LatticeFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &LatticeFunction {
    type Output = LatticeFunction;

    fn neg(self) -> LatticeFunction {
        self.scale(-1.0)
    }
}

impl FromIterator<(i64, f64)> for LatticeFunction {
    fn from_iter<T: IntoIterator<Item = (i64, f64)>>(iter: T) -> Self {
        Self::from_pairs(iter)
    }
}
