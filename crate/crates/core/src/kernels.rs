//! Bilinear kernels
//!
//! ```text
//! K_{N1,N2}(x1, x2) = sum_{y in J} phi_J(y) mu_{N1}(x1 - y) mu_{N2}(x2 - y)
//! ```
//!
//! stored densely on the rectangle of their support, the averaged kernel
//! `mu_N * 1_Q / |Q|`, and empirical probes of their size and regularity.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{DyadicInterval, Interval, LatticeFunction};
use crate::measures::{BumpFunction, PointMassMeasure};
use crate::numeric::fit_line;
use crate::operators::{convolve, ConvolveMode, TransformConfig};

/// Largest number of dense entries a kernel rectangle may hold.
pub const MAX_KERNEL_ENTRIES: usize = 1 << 25;

/// Half-width of the off-diagonal window used to smooth across the band.
const SMOOTH_RADIUS: i64 = 4;

/// Dense kernel on `rows x cols`; zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearKernel {
    window: Interval,
    n1: u64,
    n2: u64,
    rows: Interval,
    cols: Interval,
    values: Vec<f64>,
}

impl BilinearKernel {
    /// `sum_{y in window} phi_window(y) m1(x1 - y) m2(x2 - y)` by the
    /// direct triple sum. `n1`, `n2` only label the result.
    pub fn from_measures(
        m1: &PointMassMeasure,
        m2: &PointMassMeasure,
        n1: u64,
        n2: u64,
        window: Interval,
        bump: BumpFunction,
    ) -> Result<Self> {
        let empty = Interval::new(window.start(), window.start())?;
        let ys: Vec<(i64, f64)> = window
            .sites()
            .map(|y| (y, bump.on_window(&window, y)))
            .filter(|&(_, p)| p != 0.0)
            .collect();
        let (Some(h1), Some(h2), Some(&(y_lo, _)), Some(&(y_hi, _))) =
            (m1.support_hull(), m2.support_hull(), ys.first(), ys.last())
        else {
            return Ok(Self {
                window,
                n1,
                n2,
                rows: empty,
                cols: empty,
                values: Vec::new(),
            });
        };
        let rows = Interval::new(y_lo + h1.start(), y_hi + h1.end())?;
        let cols = Interval::new(y_lo + h2.start(), y_hi + h2.end())?;
        let (nr, nc) = (rows.len() as usize, cols.len() as usize);
        if nr.saturating_mul(nc) > MAX_KERNEL_ENTRIES {
            return Err(Error::KernelTooLarge(nr, nc));
        }
        let mut values = vec![0.0; nr * nc];
        let offsets: Vec<usize> = m2
            .sites()
            .iter()
            .map(|&s| (s - h2.start()) as usize)
            .collect();
        let w2 = m2.weights();
        for &(y, p) in &ys {
            let col0 = (y + h2.start() - cols.start()) as usize;
            for (s1, w1) in m1.iter() {
                let r = (y + s1 - rows.start()) as usize;
                let row = &mut values[r * nc + col0..];
                let a = p * w1;
                for (&o, &w) in offsets.iter().zip(w2) {
                    row[o] += a * w;
                }
            }
        }
        Ok(Self {
            window,
            n1,
            n2,
            rows,
            cols,
            values,
        })
    }

    pub fn window(&self) -> Interval {
        self.window
    }

    pub fn n1(&self) -> u64 {
        self.n1
    }

    pub fn n2(&self) -> u64 {
        self.n2
    }

    /// Range of `x1` covered by the dense rectangle.
    pub fn rows(&self) -> Interval {
        self.rows
    }

    /// Range of `x2` covered by the dense rectangle.
    pub fn cols(&self) -> Interval {
        self.cols
    }

    /// Row-major dense values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x1: i64, x2: i64) -> f64 {
        if !self.rows.contains(x1) || !self.cols.contains(x2) {
            return 0.0;
        }
        let r = (x1 - self.rows.start()) as usize;
        let c = (x2 - self.cols.start()) as usize;
        self.values[r * self.cols.len() as usize + c]
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |K| * (N1 N2)^alpha / |J|`.
    pub fn size_constant(&self, alpha: f64) -> f64 {
        self.sup_abs() * ((self.n1 * self.n2) as f64).powf(alpha) / self.window.len() as f64
    }

    /// Number of nonzero entries outside
    /// `|x1 - x_J| <= c N1^alpha, |x2 - x_J| <= c N2^alpha`.
    pub fn support_violations(&self, alpha: f64, c: f64) -> usize {
        let xj = self.window.center();
        let r1 = c * (self.n1 as f64).powf(alpha);
        let r2 = c * (self.n2 as f64).powf(alpha);
        let nc = self.cols.len() as usize;
        let mut bad = 0;
        for (r, x1) in self.rows.sites().enumerate() {
            let row = &self.values[r * nc..(r + 1) * nc];
            let far1 = (x1 as f64 - xj).abs() > r1;
            for (&v, x2) in row.iter().zip(self.cols.sites()) {
                if v != 0.0 && (far1 || (x2 as f64 - xj).abs() > r2) {
                    bad += 1;
                }
            }
        }
        bad
    }

    /// `(K b)(x1) = sum_{x2} K(x1, x2) b(x2)`.
    pub fn apply(&self, b: &LatticeFunction) -> LatticeFunction {
        let nc = self.cols.len() as usize;
        let pairs: Vec<(usize, f64)> = b
            .iter()
            .filter(|&(x, _)| self.cols.contains(x))
            .map(|(x, v)| ((x - self.cols.start()) as usize, v))
            .collect();
        let out = self.rows.sites().enumerate().filter_map(|(r, x1)| {
            let row = &self.values[r * nc..(r + 1) * nc];
            let v: f64 = pairs.iter().map(|&(c, bv)| row[c] * bv).sum();
            (v != 0.0).then_some((x1, v))
        });
        LatticeFunction::from_pairs(out)
    }

    /// `<K b2, b1> = sum_{x1, x2} K(x1, x2) b1(x1) b2(x2)`.
    pub fn bilinear(&self, b1: &LatticeFunction, b2: &LatticeFunction) -> f64 {
        self.apply(b2).iter().map(|(x, v)| v * b1.get(x)).sum()
    }

    /// `sup_x |K(x + h e_dir) - K(x)|` with `K = 0` off the rectangle.
    pub fn increment_sup(&self, direction: Direction, h: u64) -> f64 {
        let h = h as i64;
        let mut best: f64 = 0.0;
        let (rows, cols) = (self.rows, self.cols);
        let (lo1, hi1, lo2, hi2) = match direction {
            Direction::First => (rows.start() - h, rows.end(), cols.start(), cols.end()),
            Direction::Second => (rows.start(), rows.end(), cols.start() - h, cols.end()),
        };
        let (d1, d2) = match direction {
            Direction::First => (h, 0),
            Direction::Second => (0, h),
        };
        for x1 in lo1..hi1 {
            for x2 in lo2..hi2 {
                best = best.max((self.get(x1 + d1, x2 + d2) - self.get(x1, x2)).abs());
            }
        }
        best
    }
}

/// `K_{N1,N2}` over the window `J` for two active scales of `cfg`.
pub fn kernel(n1: u64, n2: u64, window: Interval, cfg: &TransformConfig) -> Result<BilinearKernel> {
    let m1 = cfg.mu(cfg.scale_index(n1)?);
    let m2 = cfg.mu(cfg.scale_index(n2)?);
    BilinearKernel::from_measures(m1, m2, n1, n2, window, cfg.bump())
}

/// The kernel of `sum_{y in J} phi_J(y) (mu_{N1} * b1)(y) (mu_{N2} * b2)(y)`
/// as a bilinear form in `(b1, b2)`: built from the reflected measures.
pub fn quadratic_kernel(
    n1: u64,
    n2: u64,
    window: Interval,
    cfg: &TransformConfig,
) -> Result<BilinearKernel> {
    let m1 = cfg.mu(cfg.scale_index(n1)?).reflect();
    let m2 = cfg.mu(cfg.scale_index(n2)?).reflect();
    BilinearKernel::from_measures(&m1, &m2, n1, n2, window, cfg.bump())
}

/// Support constant `2^alpha + 1`.
pub fn support_constant(alpha: f64) -> f64 {
    2f64.powf(alpha) + 1.0
}

/// Empirical `C` in `|K| <= C |J| / (N1 N2)^alpha`.
pub fn probe_size_bound(n1: u64, n2: u64, window: Interval, cfg: &TransformConfig) -> Result<f64> {
    Ok(kernel(n1, n2, window, cfg)?.size_constant(cfg.alpha()))
}

/// Which variable an increment moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    First,
    Second,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Direction::First),
            "2" => Ok(Direction::Second),
            other => Err(invalid("direction", format!("`{other}` is not 1 or 2"))),
        }
    }
}

/// Result of a log-log regression of increments against `|h| / N^alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderFit {
    /// Fitted exponent; infinite when fewer than two increments are nonzero.
    pub delta: f64,
    /// `exp(intercept)`, or 0 in the degenerate case.
    pub c_hat: f64,
    /// `(h, normalized increment)` pairs fed to the regression.
    pub samples: Vec<(u64, f64)>,
}

impl HolderFit {
    fn from_samples(samples: Vec<(u64, f64)>, scale: f64) -> Self {
        let (xs, ys): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter(|&&(h, v)| h > 0 && v > 0.0)
            .map(|&(h, v)| ((h as f64 / scale).ln(), v.ln()))
            .unzip();
        match fit_line(&xs, &ys) {
            Some((slope, intercept)) => Self {
                delta: slope,
                c_hat: intercept.exp(),
                samples,
            },
            None => Self {
                delta: f64::INFINITY,
                c_hat: 0.0,
                samples,
            },
        }
    }
}

/// `h = 1, 2, 4, ..., 2^floor(log2(N^alpha / 4))`, with at least two steps.
pub fn holder_steps(n: u64, alpha: f64) -> Vec<u64> {
    let top = ((n as f64).powf(alpha) / 4.0).log2().floor().max(1.0) as u32;
    (0..=top).map(|k| 1u64 << k).collect()
}

/// Regression of `sup_x |K(x + h e_dir) - K(x)| (N1 N2)^alpha / |J|`
/// against `h / N_dir^alpha`.
pub fn holder_fit(k: &BilinearKernel, direction: Direction, alpha: f64) -> HolderFit {
    let n = match direction {
        Direction::First => k.n1,
        Direction::Second => k.n2,
    };
    let norm = ((k.n1 * k.n2) as f64).powf(alpha) / k.window.len() as f64;
    let samples = holder_steps(n, alpha)
        .into_iter()
        .map(|h| (h, k.increment_sup(direction, h) * norm))
        .collect();
    HolderFit::from_samples(samples, (n as f64).powf(alpha))
}

pub fn probe_holder(
    n1: u64,
    n2: u64,
    window: Interval,
    cfg: &TransformConfig,
    direction: Direction,
) -> Result<HolderFit> {
    Ok(holder_fit(
        &kernel(n1, n2, window, cfg)?,
        direction,
        cfg.alpha(),
    ))
}

/// `K = smooth + err + diag_coeff * delta_0(x1 - x2)`, with `err` carried
/// by the band `|x1 - x2| <= band`.
#[derive(Clone, Debug)]
pub struct DiagonalSplit {
    pub smooth: BilinearKernel,
    pub err: BilinearKernel,
    pub diag_coeff: f64,
    pub band: u64,
}

impl DiagonalSplit {
    /// `|diag_coeff| N^(1 + alpha) / |J|`.
    pub fn diag_constant(&self, alpha: f64) -> f64 {
        let n = self.err.n1 as f64;
        self.diag_coeff.abs() * n.powf(1.0 + alpha) / self.err.window.len() as f64
    }

    /// `sup_{x1, x2} sum_k |err(x1 - k p, x2 - k p)|`: the error summed over
    /// all translates of the window by multiples of `period`.
    pub fn err_translate_sup(&self, period: u64) -> f64 {
        let err = &self.err;
        let p = period.max(1) as i64;
        let mut best: f64 = 0.0;
        let b = self.band as i64;
        for d in -b..=b {
            let mut acc = vec![0.0; p as usize];
            for x1 in err.rows.sites() {
                let v = err.get(x1, x1 + d);
                if v != 0.0 {
                    acc[x1.rem_euclid(p) as usize] += v.abs();
                }
            }
            best = acc.iter().fold(best, |m, &v| m.max(v));
        }
        best
    }

    /// `N^alpha` times the translate-summed error, with the period `|J|`.
    pub fn err_constant(&self, alpha: f64) -> f64 {
        let n = self.err.n1 as f64;
        self.err_translate_sup(self.err.window.len()) * n.powf(alpha)
    }

    /// Largest site-wise gap between `smooth + err + diag` and `k`.
    pub fn reconstruction_error(&self, k: &BilinearKernel) -> f64 {
        let mut worst: f64 = 0.0;
        for x1 in k.rows.sites() {
            for x2 in k.cols.sites() {
                let diag = if x1 == x2 { self.diag_coeff } else { 0.0 };
                let sum = self.smooth.get(x1, x2) + self.err.get(x1, x2) + diag;
                worst = worst.max((sum - k.get(x1, x2)).abs());
            }
        }
        worst
    }
}

/// Numerical diagonal split of a square kernel: inside the band the smooth
/// part is the mean of `K(x1, x1 + d')` over `d' in [d - 4, d + 4] \ {0}`,
/// the diagonal coefficient is the mean excess of `K(x, x)` over it on the
/// diagonal support, and `err` is what remains inside the band.
pub fn split_diagonal(k: &BilinearKernel, band: u64) -> Result<DiagonalSplit> {
    if k.rows != k.cols {
        return Err(invalid(
            "kernel",
            "diagonal split needs equal row and column ranges",
        ));
    }
    let width = k.rows.len();
    if width > 0 && band >= width {
        return Err(Error::BandTooWide {
            band,
            support: width,
        });
    }
    let mut smooth = k.clone();
    let mut err = BilinearKernel {
        values: vec![0.0; k.values.len()],
        ..k.clone()
    };
    let n = width as i64;
    let b = band as i64;
    let start = k.rows.start();
    let mut excess = Vec::new();
    for x1 in k.rows.sites() {
        let r = x1 - start;
        for d in -b..=b {
            let c = r + d;
            if c < 0 || c >= n {
                continue;
            }
            let mut sum = 0.0;
            let mut count = 0.0;
            for dd in d - SMOOTH_RADIUS..=d + SMOOTH_RADIUS {
                if dd != 0 {
                    sum += k.get(x1, x1 + dd);
                    count += 1.0;
                }
            }
            let idx = (r * n + c) as usize;
            smooth.values[idx] = sum / count;
            if d == 0 && k.values[idx] != 0.0 {
                excess.push(k.values[idx] - smooth.values[idx]);
            }
        }
    }
    let diag_coeff = if excess.is_empty() {
        0.0
    } else {
        excess.iter().sum::<f64>() / excess.len() as f64
    };
    for r in 0..n {
        for c in (r - b).max(0)..(r + b + 1).min(n) {
            let idx = (r * n + c) as usize;
            let diag = if r == c { diag_coeff } else { 0.0 };
            err.values[idx] = k.values[idx] - smooth.values[idx] - diag;
        }
    }
    Ok(DiagonalSplit {
        smooth,
        err,
        diag_coeff,
        band,
    })
}

/// Band half-width `floor(N^(1 - eps))`.
pub fn band_width(n: u64, eps: f64) -> u64 {
    (n as f64).powf(1.0 - eps).floor() as u64
}

/// Diagonal split of `K_{N,N}` with band `floor(N^(1 - eps))`.
pub fn diagonal_split(
    n: u64,
    window: Interval,
    cfg: &TransformConfig,
    eps: f64,
) -> Result<DiagonalSplit> {
    split_diagonal(&kernel(n, n, window, cfg)?, band_width(n, eps))
}

/// `K_N = mu_N * 1_Q / |Q|`.
pub fn averaged_kernel(
    n: u64,
    q: &DyadicInterval,
    cfg: &TransformConfig,
) -> Result<LatticeFunction> {
    let m = cfg.mu(cfg.scale_index(n)?);
    let len = q.len() as usize;
    let ones = LatticeFunction::from_dense(q.start(), &vec![1.0 / len as f64; len]);
    convolve(m, &ones, ConvolveMode::Direct)
}

/// `sum_x |g(x + h) - g(x)|^2`.
pub fn increment_energy(g: &LatticeFunction, h: u64) -> f64 {
    if h == 0 {
        return 0.0;
    }
    let shifted = g.translate(-(h as i64));
    (&shifted - g).values().iter().map(|v| v * v).sum()
}

/// Regression report for the averaged kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedHolder {
    pub fit: HolderFit,
    /// `|Q| < M^(alpha - 1 + eps)`: the probe ran outside its hypothesis.
    pub below_threshold: bool,
}

/// Regression of `N^alpha sum_x |K_N(x + h) - K_N(x)|^2` against `h / N^alpha`.
pub fn averaged_kernel_holder(
    n: u64,
    q: &DyadicInterval,
    cfg: &TransformConfig,
    h_list: &[u64],
    eps: f64,
) -> Result<AveragedHolder> {
    let g = averaged_kernel(n, q, cfg)?;
    let scale = (n as f64).powf(cfg.alpha());
    let samples = h_list
        .iter()
        .map(|&h| (h, increment_energy(&g, h) * scale))
        .collect();
    let threshold = (cfg.m() as f64).powf(cfg.alpha() - 1.0 + eps);
    Ok(AveragedHolder {
        fit: HolderFit::from_samples(samples, scale),
        below_threshold: (q.len() as f64) < threshold,
    })
}

/// One cell of a kernel probe grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeCell {
    pub n1: u64,
    pub n2: u64,
    pub window: Interval,
}

/// Probe report row; `delta_hat` is the smaller of the two directional fits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelProbeRow {
    #[serde(rename = "N1")]
    pub n1: u64,
    #[serde(rename = "N2")]
    pub n2: u64,
    #[serde(rename = "J_center")]
    pub j_center: f64,
    #[serde(rename = "J_len")]
    pub j_len: u64,
    #[serde(rename = "C_hat")]
    pub c_hat: f64,
    pub delta_hat: f64,
    pub cell_runtime_ms: u128,
}

/// Size and regularity probes over `cells`, in input order. Diagonal
/// cells report the size constant of the smooth part of their split.
pub fn probe_grid(
    cells: &[ProbeCell],
    cfg: &TransformConfig,
    eps: f64,
) -> Result<Vec<KernelProbeRow>> {
    cells
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let k = kernel(cell.n1, cell.n2, cell.window, cfg)?;
            let k = if cell.n1 == cell.n2 {
                split_diagonal(&k, band_width(cell.n1, eps))?.smooth
            } else {
                k
            };
            let alpha = cfg.alpha();
            let d1 = holder_fit(&k, Direction::First, alpha).delta;
            let d2 = holder_fit(&k, Direction::Second, alpha).delta;
            Ok(KernelProbeRow {
                n1: cell.n1,
                n2: cell.n2,
                j_center: cell.window.center(),
                j_len: cell.window.len(),
                c_hat: k.size_constant(alpha),
                delta_hat: d1.min(d2),
                cell_runtime_ms: start.elapsed().as_millis(),
            })
        })
        .collect()
}
