//! Dyadic-block square functions: the maximal-to-square reduction for
//! partial sums and the two sides of the square-function estimate over a
//! window `J`.

use crate::error::Result;
use crate::kernels::{band_width, quadratic_kernel, split_diagonal};
use crate::lattice::{DyadicInterval, Interval, LatticeFunction};
use crate::measures::PointMassMeasure;
use crate::operators::TransformConfig;

/// `ceil(log2 max(d, 2))`.
pub fn log_levels(d: usize) -> u32 {
    let d = d.max(2) as u64;
    64 - (d - 1).leading_zeros()
}

/// Both sides of the block inequality for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSquareReport {
    pub d: usize,
    pub levels: u32,
    /// `sum_s |block(k, s)|^2` for `k = 0..=levels`.
    pub level_sums: Vec<f64>,
    /// `max_i |a_1 + ... + a_i|^2`.
    pub lhs: f64,
    /// `levels * sum_k level_sums[k]`.
    pub rhs: f64,
}

impl BlockSquareReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Block `(k, s)` is `2^k s < j <= 2^k (s + 1)` in 1-based indices.
pub fn menshov_check(a: &[f64]) -> BlockSquareReport {
    let d = a.len();
    let levels = log_levels(d);
    let mut prefix = 0.0f64;
    let mut lhs = 0.0f64;
    for &v in a {
        prefix += v;
        lhs = lhs.max(prefix * prefix);
    }
    let level_sums: Vec<f64> = (0..=levels)
        .map(|k| {
            a.chunks(1usize << k)
                .map(|c| {
                    let s: f64 = c.iter().sum();
                    s * s
                })
                .sum()
        })
        .collect();
    let rhs = levels as f64 * level_sums.iter().sum::<f64>();
    BlockSquareReport {
        d,
        levels,
        level_sums,
        lhs,
        rhs,
    }
}

/// Pointwise sums of `terms` over the blocks `2^k s < j <= 2^k (s + 1)`.
pub fn dyadic_block_sums(terms: &[LatticeFunction], k: u32) -> Vec<LatticeFunction> {
    let width = 1usize.checked_shl(k).unwrap_or(usize::MAX).max(1);
    terms
        .chunks(width)
        .map(|c| c.iter().fold(LatticeFunction::zero(), |acc, t| &acc + t))
        .collect()
}

/// The member of `J_N` (dyadic, `8 N^alpha <= |I| < 16 N^alpha`) holding `x`.
pub fn block_for(n: u64, alpha: f64, x: i64) -> DyadicInterval {
    let scale = (8.0 * (n as f64).powf(alpha)).log2().ceil() as u32;
    DyadicInterval::containing(x, scale)
}

/// `I*`: three times `I`, concentric.
pub fn enlarged(i: &DyadicInterval) -> Interval {
    i.interval().dilate(3)
}

/// Empirical kernel constants substituted into the right-hand side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConstants {
    /// `C` of the size bound `|K| <= C |J| / (N1 N2)^alpha`.
    pub size: f64,
    /// Regularity exponent `delta`.
    pub delta: f64,
    /// `C` of the diagonal bound `|C_{N,J}| <= C |J| / N^(1 + alpha)`.
    pub diag: f64,
    /// `eps` of the error band `|x1 - x2| <= N^(1 - eps)`.
    pub band_exponent: f64,
}

/// One bad function `b^{A,N}_{s,i}` with its scale and size class.
#[derive(Clone, Debug, PartialEq)]
pub struct BadTerm {
    pub n: u64,
    pub s: u32,
    pub b: LatticeFunction,
}

/// `LHS` and the three right-hand terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SquareSides {
    pub lhs: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl SquareSides {
    /// `lhs / (d1 + d2 + d3)`; zero when both sides vanish.
    pub fn ratio(&self) -> f64 {
        let rhs = self.d1 + self.d2 + self.d3;
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / rhs
        }
    }
}

/// `(m * b)(y)` for `y` in `window`.
fn convolve_on(m: &PointMassMeasure, b: &LatticeFunction, window: &Interval) -> Vec<f64> {
    window
        .sites()
        .map(|y| m.iter().map(|(s, w)| w * b.get(y - s)).sum())
        .collect()
}

/// Left side
/// `sum_{y in J} sum_j |sum_{S_j < N <= S_{j+1}} sum_s mu_N * b_{N,s}(y)|^2 phi_J(y)`
/// and the right side `D_I + D_II + D_III` with the probe constants.
/// Each `b` is first restricted to `I*` of its scale.
pub fn square_function_sides(
    window: Interval,
    bad: &[BadTerm],
    stops: &[u64],
    cfg: &TransformConfig,
    consts: &ProbeConstants,
) -> Result<SquareSides> {
    let alpha = cfg.alpha();
    let bump = cfg.bump();
    let jl = window.len() as f64;
    let phi: Vec<f64> = window.sites().map(|y| bump.on_window(&window, y)).collect();
    let local: Vec<LatticeFunction> = bad
        .iter()
        .map(|t| {
            t.b.restrict(&enlarged(&block_for(t.n, alpha, window.start())))
        })
        .collect();

    let mut lhs = 0.0;
    for pair in stops.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let mut g = vec![0.0; window.len() as usize];
        for (t, b) in bad.iter().zip(&local) {
            if lo < t.n && t.n <= hi && !b.is_empty() {
                let m = cfg.mu(cfg.scale_index(t.n)?);
                for (acc, v) in g.iter_mut().zip(convolve_on(m, b, &window)) {
                    *acc += v;
                }
            }
        }
        lhs += g.iter().zip(&phi).map(|(v, p)| v * v * p).sum::<f64>();
    }

    let l1: Vec<f64> = local.iter().map(|b| b.l1_norm()).collect();
    let mut d1 = 0.0;
    for (t1, n1) in bad.iter().zip(&l1) {
        for (t2, n2) in bad.iter().zip(&l1) {
            if t2.n <= t1.n {
                let decay = 2f64.powf(-consts.delta * (t1.s + t2.s) as f64);
                d1 += decay * consts.size * jl / ((t1.n * t2.n) as f64).powf(alpha) * n1 * n2;
            }
        }
    }

    let mut d2 = 0.0;
    for (t, b) in bad.iter().zip(&local) {
        let energy: f64 = b.values().iter().map(|v| v * v).sum();
        d2 += consts.diag * jl / (t.n as f64).powf(alpha + 1.0) * energy;
    }

    let mut d3 = 0.0;
    let mut scales: Vec<u64> = bad.iter().map(|t| t.n).collect();
    scales.sort_unstable();
    scales.dedup();
    for n in scales {
        let members: Vec<&LatticeFunction> = bad
            .iter()
            .zip(&local)
            .filter(|(t, b)| t.n == n && !b.is_empty())
            .map(|(_, b)| b)
            .collect();
        if members.is_empty() {
            continue;
        }
        let k = quadratic_kernel(n, n, window, cfg)?;
        let split = split_diagonal(&k, band_width(n, consts.band_exponent))?;
        for b1 in &members {
            let applied = split.err.apply(b1).abs();
            for b2 in &members {
                d3 += applied
                    .iter()
                    .map(|(x, v)| v * b2.get(x).abs())
                    .sum::<f64>();
            }
        }
    }

    Ok(SquareSides { lhs, d1, d2, d3 })
}
