//! Calderón-Zygmund decomposition on the dyadic grid anchored at zero, the
//! size-classed cube families and the bad/good functions built from them.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::lattice::{conditional_expectation, DyadicInterval, IntervalFamily, LatticeFunction};
use crate::numeric::{dyadic_log2, exact_sum};

/// Maximal dyadic cubes on which a nonnegative function averages more
/// than `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct CzDecomposition {
    lambda: f64,
    cubes: IntervalFamily,
    /// Averages aligned with `cubes.members()`.
    averages: Vec<f64>,
}

impl CzDecomposition {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cubes(&self) -> &IntervalFamily {
        &self.cubes
    }

    pub fn averages(&self) -> &[f64] {
        &self.averages
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicInterval, f64)> + '_ {
        self.cubes
            .iter()
            .copied()
            .zip(self.averages.iter().copied())
    }

    /// Writes one `scale index average` line per cube.
    pub fn write_cubes<W: Write>(&self, mut out: W) -> Result<()> {
        for (q, avg) in self.iter() {
            writeln!(out, "{} {} {}", q.scale(), q.index(), avg)?;
        }
        Ok(())
    }
}

fn check_lambda(lam: f64) -> Result<()> {
    if !(lam > 0.0 && lam.is_finite()) {
        return Err(invalid("lambda", format!("{lam} is not a positive number")));
    }
    Ok(())
}

/// Sum of the values at the stored indices `range` of `f`, correctly
/// rounded so that cube averages are reproducible.
fn mass(values: &[f64], range: std::ops::Range<usize>) -> f64 {
    exact_sum(values[range].iter().copied())
}

/// Smallest dyadic interval containing every site in `sites` (all of one
/// sign).
fn enclosing_cube(sites: &[i64]) -> DyadicInterval {
    let (a, b) = (sites[0], *sites.last().unwrap());
    let mut scale = 0;
    while a >> scale != b >> scale {
        scale += 1;
    }
    DyadicInterval::containing(a, scale)
}

/// Decomposes a nonnegative `f` at height `lam`.
///
/// The support is split at zero (no anchored dyadic interval straddles it).
/// On each side the root is the smallest dyadic interval containing that
/// part, doubled until its average is at most `lam`; the selected cubes
/// are the maximal descendants with average above `lam`.
pub fn cz_decompose(f: &LatticeFunction, lam: f64) -> Result<CzDecomposition> {
    check_lambda(lam)?;
    if let Some((site, value)) = f.iter().find(|p| p.1 < 0.0) {
        return Err(Error::NegativeValue { site, value });
    }
    let sites = f.sites();
    let values = f.values();
    let split = sites.partition_point(|&x| x < 0);

    let mut cubes = Vec::new();
    let mut averages = Vec::new();
    for part in [0..split, split..sites.len()] {
        if part.is_empty() {
            continue;
        }
        let mut root = enclosing_cube(&sites[part.clone()]);
        let total = mass(values, part);
        while total > lam * root.len() as f64 {
            root = root.parent();
        }
        let mut stack = vec![root];
        while let Some(q) = stack.pop() {
            let Some(children) = q.children() else {
                continue;
            };
            // Right child first so cubes come off the stack left to right.
            for child in children.into_iter().rev() {
                let range = f.index_range(&child.interval());
                if range.is_empty() {
                    continue;
                }
                let m = mass(values, range);
                if m > lam * child.len() as f64 {
                    cubes.push(child);
                    averages.push(m / child.len() as f64);
                } else {
                    stack.push(child);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..cubes.len()).collect();
    order.sort_by_key(|&i| cubes[i].start());
    let averages = order.iter().map(|&i| averages[i]).collect();
    let cubes = IntervalFamily::new(order.iter().map(|&i| cubes[i]).collect())?;
    Ok(CzDecomposition {
        lambda: lam,
        cubes,
        averages,
    })
}

/// Zeroes `f` on every cube of length at most `threshold`.
pub fn purge_small_cubes(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    threshold: f64,
) -> LatticeFunction {
    let small = dec.cubes().filter(|q| q.len() as f64 <= threshold);
    f.filter(|x, _| !small.covers(x))
}

/// The two cube families: `D1` when `2^s > A`, `D2` when `2^s <= A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BadFamily {
    D1,
    D2,
}

impl BadFamily {
    pub fn for_class(a: u64, s: u32) -> Self {
        if s >= 64 || (1u64 << s) > a {
            BadFamily::D1
        } else {
            BadFamily::D2
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            BadFamily::D1 => 1,
            BadFamily::D2 => 2,
        }
    }
}

/// Index `(A, N, s, i)` of a bad function; `i` is determined by `A, s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BadIndex {
    pub a: u64,
    pub n: u64,
    pub s: u32,
    pub family: BadFamily,
}

impl BadIndex {
    pub fn new(a: u64, n: u64, s: u32) -> Result<Self> {
        dyadic_log2(a)?;
        dyadic_log2(n)?;
        Ok(Self {
            a,
            n,
            s,
            family: BadFamily::for_class(a, s),
        })
    }
}

/// Size class `s` of a cube of length `len` relative to the scale `N`:
/// the unique `s >= 0` with `floor(alpha (n-s-1)) < log2 len <= floor(alpha (n-s))`,
/// where `N = 2^n`. Cubes longer than `N^alpha` have no class.
///
/// For `alpha` close to one the classes are single dyadic lengths
/// `2^floor(alpha (n - s))`, and in general they partition the cubes of
/// length at most `N^alpha`.
pub fn size_class(len: u64, n: u64, alpha: f64) -> Option<u32> {
    let k = dyadic_log2(len).ok()? as i64;
    let n = dyadic_log2(n).ok()? as i64;
    let top = |j: i64| (alpha * j as f64).floor() as i64;
    if k > top(n) {
        return None;
    }
    (0..=n)
        .find(|&s| top(n - s - 1) < k && k <= top(n - s))
        .map(|s| s as u32)
}

/// The cubes of `dec` in size class `idx.s` relative to `idx.n`.
pub fn cube_family(dec: &CzDecomposition, idx: &BadIndex, alpha: f64) -> IntervalFamily {
    dec.cubes()
        .filter(|q| size_class(q.len(), idx.n, alpha) == Some(idx.s))
}

/// `band(f, lam N, A)`.
fn height_band(f: &LatticeFunction, idx: &BadIndex, lam: f64) -> LatticeFunction {
    f.band(lam * idx.n as f64, idx.a)
}

/// `sum_{Q in D} (1_Q g - E_Q g)` with `g = band(f, lam N, A)`.
pub fn bad_part(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    idx: &BadIndex,
    lam: f64,
    alpha: f64,
) -> LatticeFunction {
    let fam = cube_family(dec, idx, alpha);
    let g = height_band(f, idx, lam);
    let local = g.filter(|x, _| fam.covers(x));
    &local - &conditional_expectation(&local, &fam)
}

/// `1_{union D} g` with `g = band(f, lam N, A)`.
pub fn good_part(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    idx: &BadIndex,
    lam: f64,
    alpha: f64,
) -> LatticeFunction {
    let fam = cube_family(dec, idx, alpha);
    height_band(f, idx, lam).filter(|x, _| fam.covers(x))
}

/// The three good functions attached to one bad index.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodParts {
    /// `f^{A,N}_{s,i}`.
    pub by_class: LatticeFunction,
    /// `f^{A,N}_i = sum_s f^{A,N}_{s,i}`.
    pub summed: LatticeFunction,
    /// `f^N_{s,2} = sum_{A >= 2^s} f^{A,N}_{s,2}`.
    pub class_two: LatticeFunction,
}

pub fn good_parts(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    idx: &BadIndex,
    lam: f64,
    alpha: f64,
) -> Result<GoodParts> {
    Ok(GoodParts {
        by_class: good_part(f, dec, idx, lam, alpha),
        summed: good_summed(f, dec, idx.a, idx.n, idx.family, lam, alpha)?,
        class_two: good_class_two(f, dec, idx.n, idx.s, lam, alpha)?,
    })
}

/// `f^{A,N}_i`.
pub fn good_summed(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    a: u64,
    n: u64,
    family: BadFamily,
    lam: f64,
    alpha: f64,
) -> Result<LatticeFunction> {
    let max_s = dyadic_log2(n)?;
    let mut total = LatticeFunction::zero();
    for s in 0..=max_s {
        let idx = BadIndex::new(a, n, s)?;
        if idx.family == family {
            total = &total + &good_part(f, dec, &idx, lam, alpha);
        }
    }
    Ok(total)
}

/// `f^N_{s,2}`: the class-two good parts summed over every dyadic
/// `A >= 2^s` with a nonempty band.
pub fn good_class_two(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    n: u64,
    s: u32,
    lam: f64,
    alpha: f64,
) -> Result<LatticeFunction> {
    let top = lam * n as f64;
    let last = f.band_count(top);
    let mut total = LatticeFunction::zero();
    if s >= 63 {
        return Ok(total);
    }
    let mut a = 1u64 << s;
    while a <= last {
        let idx = BadIndex::new(a, n, s)?;
        total = &total + &good_part(f, dec, &idx, lam, alpha);
        a *= 2;
    }
    Ok(total)
}

/// Outcome of the two cube-size checks at one `(N, A)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyCzReport {
    pub high_cubes: usize,
    pub band_cubes: usize,
    /// Cubes meeting `{f >= lam N}` with `2|Q| < N`.
    pub high_violations: Vec<DyadicInterval>,
    /// Cubes meeting `{f ~ lam N / A}` with `4A|Q| < N`.
    pub band_violations: Vec<DyadicInterval>,
}

impl KeyCzReport {
    pub fn violations(&self) -> usize {
        self.high_violations.len() + self.band_violations.len()
    }
}

/// Checks that every cube meeting `{f >= lam N}` has `|Q| >= N/2` and
/// every cube meeting the band `lam N / A` has `|Q| >= N/(4A)`. Both follow
/// from the cube average being at most `2 lam`.
pub fn verify_key_cz(
    f: &LatticeFunction,
    dec: &CzDecomposition,
    lam: f64,
    n: u64,
    a: u64,
) -> Result<KeyCzReport> {
    check_lambda(lam)?;
    dyadic_log2(n)?;
    dyadic_log2(a)?;
    let top = lam * n as f64;
    let (_, high) = f.truncate_split(top);
    let band = f.band(top, a);
    let mut report = KeyCzReport::default();
    for q in dec.cubes() {
        let iv = q.interval();
        if !high.index_range(&iv).is_empty() {
            report.high_cubes += 1;
            if 2 * q.len() < n {
                report.high_violations.push(*q);
            }
        }
        if !band.index_range(&iv).is_empty() {
            report.band_cubes += 1;
            if 4 * (a as u128) * (q.len() as u128) < n as u128 {
                report.band_violations.push(*q);
            }
        }
    }
    Ok(report)
}
