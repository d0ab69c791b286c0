use crate::error::{invalid, Result};
use crate::lattice::{conditional_expectation, IntervalFamily, LatticeFunction};

use super::transform::TransformConfig;

/// The pieces of `f_0` attached to one scale `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleTerms {
    pub n: u64,
    /// `f_0 * 1{|f_0| >= lam N}`.
    pub high: LatticeFunction,
    /// `E high` over the cube family.
    pub high_mean: LatticeFunction,
    /// `low - E low` with `low = f_0 * 1{|f_0| < lam N}`.
    pub low_oscillation: LatticeFunction,
}

impl ScaleTerms {
    /// `high - E high`.
    pub fn high_oscillation(&self) -> LatticeFunction {
        &self.high - &self.high_mean
    }
}

/// `f_0 = (high - E high) + (low - E low) + E f_0` at every scale, plus
/// `G_M = sum_N nu_N * E high_N`.
#[derive(Clone, Debug)]
pub struct FourTermSplit {
    pub lambda: f64,
    pub scales: Vec<ScaleTerms>,
    /// `E f_0`, shared by every scale.
    pub mean: LatticeFunction,
    pub g_m: LatticeFunction,
}

impl FourTermSplit {
    /// Largest site-wise discrepancy of the reconstruction, over all scales.
    pub fn reconstruction_error(&self, f0: &LatticeFunction) -> f64 {
        self.scales
            .iter()
            .map(|t| {
                let sum = &(&t.high_oscillation() + &t.low_oscillation) + &self.mean;
                (&sum - f0).sup_norm()
            })
            .fold(0.0, f64::max)
    }

    /// `||G_M||_2^2 / (lam ||f_0||_1)`.
    pub fn g_m_ratio(&self, f0_norm: f64) -> f64 {
        let e = self.g_m.l2_norm();
        e * e / (self.lambda * f0_norm)
    }
}

/// Splits `f_0` at the heights `lam N` of every active scale and
/// accumulates `G_M` in increasing `N`.
pub fn four_term_split(
    f0: &LatticeFunction,
    cfg: &TransformConfig,
    lam: f64,
    cubes: &IntervalFamily,
) -> Result<FourTermSplit> {
    if !(lam > 0.0) {
        return Err(invalid("lambda", format!("{lam} is not positive")));
    }
    let mean = conditional_expectation(f0, cubes);
    let mut scales = Vec::with_capacity(cfg.scales().len());
    let mut g_m = LatticeFunction::zero();
    for (i, &n) in cfg.scales().iter().enumerate() {
        let (low, high) = f0.truncate_split(lam * n as f64);
        let high_mean = conditional_expectation(&high, cubes);
        let low_oscillation = &low - &conditional_expectation(&low, cubes);
        g_m = &g_m + &cfg.convolve(i, &high_mean, true)?;
        scales.push(ScaleTerms {
            n,
            high,
            high_mean,
            low_oscillation,
        });
    }
    Ok(FourTermSplit {
        lambda: lam,
        scales,
        mean,
        g_m,
    })
}
