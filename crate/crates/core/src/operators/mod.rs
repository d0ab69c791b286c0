//! Convolution engine and the operators `H_M`, `H_M^*` built on it.

mod convolve;
mod split;
mod transform;

pub use convolve::{convolve, ConvolveMode, DIRECT_THRESHOLD, MAX_FFT_LEN};
pub use split::{four_term_split, FourTermSplit, ScaleTerms};
pub use transform::{
    h_max, h_max_bruteforce, level_set_size, max_partial_sums, partial_sum, transform,
    weak11_ratio, TransformConfig, WeakProfile,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::lattice::LatticeFunction;

/// Empirical `l^2` operator norm of `H_M`: the largest `||H_M f||_2` over
/// `trials` random Gaussian unit vectors supported on `[0, support)`.
pub fn l2_norm_probe(
    cfg: &TransformConfig,
    trials: usize,
    support: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let values: Vec<f64> = (0..support)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let f = LatticeFunction::from_dense(0, &values);
        let norm = f.l2_norm();
        if norm == 0.0 {
            continue;
        }
        best = best.max(transform(&f, cfg)?.l2_norm() / norm);
    }
    Ok(best)
}
