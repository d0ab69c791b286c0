//! Small numerical helpers shared across modules: correctly rounded
//! summation, exact floors of `m^alpha`, dyadic bookkeeping and a plain
//! least-squares line fit.

use astro_float::{BigFloat, Consts, RoundingMode};

use crate::error::{Error, Result};

/// Correctly rounded sum of a sequence of doubles (Shewchuk partials).
///
/// When the exact real sum is zero the result is exactly `0.0`.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for value in values {
        let mut x = value;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    let mut hi = match partials.pop() {
        Some(v) => v,
        None => return 0.0,
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Round-half-even correction on the tail.
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Distance below which the double-precision power is not trusted to
/// decide the floor.
const FLOOR_GUARD: f64 = 1.0 / (1u64 << 20) as f64;

/// Working precision (bits) of the fallback evaluation of `m^alpha`.
const FALLBACK_PRECISION: usize = 256;

/// Exact `floor(m^alpha)` for `m <= 2^40` and `alpha` in `(1, 2)`.
///
/// The double-precision power decides the floor unless `m^alpha` lies
/// within `2^-20` of an integer, in which case the power is recomputed
/// with 256-bit correctly rounded arithmetic rounded toward zero.
pub fn curve_floor(m: u64, alpha: f64) -> i64 {
    let approx = (m as f64).powf(alpha);
    let nearest = approx.round();
    if (approx - nearest).abs() > FLOOR_GUARD {
        return approx.floor() as i64;
    }
    let candidate = nearest as i64;
    if precise_power_at_least(m, alpha, candidate) {
        candidate
    } else {
        candidate - 1
    }
}

/// Decides `m^alpha >= k` with 256-bit arithmetic.
///
/// The power is evaluated without final rounding (a few ulps of error at
/// 256 bits). A relative gap below `2^-240` is read as exact equality: for
/// `m <= 2^40` a non-integer power cannot come that close to an integer
/// short of being one, as with `4^1.5 = 8`. Directed rounding is avoided
/// because it never terminates on exact results.
fn precise_power_at_least(m: u64, alpha: f64, k: i64) -> bool {
    let mut consts = Consts::new().expect("astro-float constants cache");
    let base = BigFloat::from_f64(m as f64, FALLBACK_PRECISION);
    let exponent = BigFloat::from_f64(alpha, FALLBACK_PRECISION);
    let power = base.pow(
        &exponent,
        FALLBACK_PRECISION,
        RoundingMode::None,
        &mut consts,
    );
    let target = BigFloat::from_f64(k as f64, FALLBACK_PRECISION);
    let gap = power.sub(&target, FALLBACK_PRECISION, RoundingMode::None);
    let tolerance = BigFloat::from_f64(k as f64 * (-240f64).exp2(), FALLBACK_PRECISION);
    if matches!(gap.abs().cmp(&tolerance), Some(c) if c <= 0) {
        return true;
    }
    !gap.is_negative()
}

pub fn is_dyadic(n: u64) -> bool {
    n.is_power_of_two()
}

/// `log2(n)` for a dyadic `n`.
pub fn dyadic_log2(n: u64) -> Result<u32> {
    if is_dyadic(n) {
        Ok(n.trailing_zeros())
    } else {
        Err(Error::NotDyadic(n))
    }
}

/// Dyadic integers `2^lo, ..., 2^hi` inclusive.
pub fn dyadic_range(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

/// Ordinary least squares fit `y = slope * x + intercept`.
///
/// Returns `None` for fewer than two points or a degenerate abscissa.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs[..n].iter().zip(&ys[..n]) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_cancels_exactly() {
        let xs = [0.1, 1e16, -0.1, -1e16, 0.3, -0.3];
        assert_eq!(exact_sum(xs), 0.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
    }

    #[test]
    fn curve_floor_small_values() {
        // m^1.001 = m * m^0.001 and m^0.001 - 1 < 1/m for m <= 7.
        for m in 2..=7u64 {
            assert_eq!(curve_floor(m, 1.001), m as i64);
        }
        assert_eq!(curve_floor(4, 1.5), 8);
        assert_eq!(curve_floor(9, 1.5), 27);
        assert_eq!(curve_floor(2, 1.5), 2);
    }

    #[test]
    fn fallback_matches_fast_path_away_from_integers() {
        for m in [1000u64, 12345, 1 << 20, (1 << 24) - 3] {
            let fast = (m as f64).powf(1.001).floor() as i64;
            assert!(precise_power_at_least(m, 1.001, fast));
            assert!(!precise_power_at_least(m, 1.001, fast + 1));
        }
    }

    #[test]
    fn dyadic_helpers() {
        assert_eq!(dyadic_log2(64).unwrap(), 6);
        assert!(dyadic_log2(48).is_err());
        assert_eq!(dyadic_range(2, 4), vec![4, 8, 16]);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (slope, intercept) = fit_line(&xs, &ys).unwrap();
        assert!((slope - 2.5).abs() < 1e-12);
        assert!((intercept + 1.0).abs() < 1e-12);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }
}
