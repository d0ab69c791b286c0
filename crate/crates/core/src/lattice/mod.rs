//! Finitely supported functions on the integers, dyadic intervals, and the
//! averaging operators built from them.

mod function;
mod interval;
pub mod io;

pub use function::LatticeFunction;
pub use interval::{DyadicInterval, Interval, IntervalFamily};

/// Replaces `f` by its mean on every interval of `family` and by zero off
/// the union.
pub fn conditional_expectation(f: &LatticeFunction, family: &IntervalFamily) -> LatticeFunction {
    let mut out = Vec::new();
    for q in family {
        let iv = q.interval();
        let total = f.sum_over(&iv);
        if total == 0.0 {
            continue;
        }
        let mean = total / q.len() as f64;
        out.extend(iv.sites().map(|x| (x, mean)));
    }
    LatticeFunction::from_sorted_unchecked(out)
}

/// Centered Hardy-Littlewood maximal function of `|f|`, evaluated on
/// `window`: the supremum over `r >= 0` of the mean of `|f|` on
/// `[x - r, x + r]`.
pub fn hl_maximal(f: &LatticeFunction, window: &Interval) -> LatticeFunction {
    let sites = f.sites();
    let mut prefix = Vec::with_capacity(sites.len() + 1);
    prefix.push(0.0);
    for v in f.values() {
        prefix.push(prefix.last().unwrap() + v.abs());
    }
    let mass = |lo: i64, hi: i64| {
        let a = sites.partition_point(|&s| s < lo);
        let b = sites.partition_point(|&s| s <= hi);
        prefix[b] - prefix[a]
    };

    let mut out = Vec::new();
    for x in window.sites() {
        // The mean only increases when the radius reaches a support site,
        // so those radii (and r = 0) are the only candidates.
        let mut best = f.get(x).abs();
        for &s in sites {
            let r = (s - x).abs();
            let avg = mass(x - r, x + r) / (2 * r + 1) as f64;
            best = best.max(avg);
        }
        out.push((x, best));
    }
    LatticeFunction::from_sorted_unchecked(out)
}
