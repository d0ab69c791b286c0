use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeFunction;
use crate::measures::{mu, BumpFunction, PointMassMeasure};
use crate::numeric::{dyadic_log2, dyadic_range};

use super::convolve::{convolve, ConvolveMode};

/// Parameters of `H_M` together with the precomputed measures of every
/// active scale.
#[derive(Clone, Debug)]
pub struct TransformConfig {
    m: u64,
    theta: f64,
    alpha: f64,
    bump: BumpFunction,
    mode: ConvolveMode,
    scales: Vec<u64>,
    mu: Vec<PointMassMeasure>,
    nu: Vec<PointMassMeasure>,
}

impl TransformConfig {
    /// Active scales are the dyadic `N` with `2^ceil(theta log2 M) <= N <= M`.
    pub fn new(m: u64, theta: f64, alpha: f64, bump: BumpFunction) -> Result<Self> {
        let log_m = dyadic_log2(m)?;
        if log_m == 0 {
            return Err(invalid("M", "must be at least 2"));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid("theta", format!("{theta} is outside (0, 1)")));
        }
        let lo = (theta * log_m as f64).ceil() as u32;
        let scales = dyadic_range(lo.max(1), log_m);
        let mu = scales
            .iter()
            .map(|&n| mu(n, alpha, bump))
            .collect::<Result<Vec<_>>>()?;
        let nu = mu.iter().map(|m| m.difference(&m.reflect())).collect();
        Ok(Self {
            m,
            theta,
            alpha,
            bump,
            mode: ConvolveMode::Auto,
            scales,
            mu,
            nu,
        })
    }

    pub fn with_mode(mut self, mode: ConvolveMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bump(&self) -> BumpFunction {
        self.bump
    }

    pub fn mode(&self) -> ConvolveMode {
        self.mode
    }

    /// The active scales in increasing order.
    pub fn scales(&self) -> &[u64] {
        &self.scales
    }

    pub fn n_min(&self) -> u64 {
        self.scales[0]
    }

    pub fn scale_index(&self, n: u64) -> Result<usize> {
        self.scales
            .binary_search(&n)
            .map_err(|_| Error::ScaleOutOfRange(n))
    }

    /// `mu_N` for the `i`-th active scale.
    pub fn mu(&self, i: usize) -> &PointMassMeasure {
        &self.mu[i]
    }

    /// `mu_N - reflect(mu_N)` for the `i`-th active scale.
    pub fn nu(&self, i: usize) -> &PointMassMeasure {
        &self.nu[i]
    }

    pub fn measure(&self, i: usize, signed: bool) -> &PointMassMeasure {
        if signed {
            &self.nu[i]
        } else {
            &self.mu[i]
        }
    }

    pub fn convolve(&self, i: usize, f: &LatticeFunction, signed: bool) -> Result<LatticeFunction> {
        convolve(self.measure(i, signed), f, self.mode)
    }
}

/// `sum_{N <= B} nu_N * f` over active `N`, with `nu = mu - reflect(mu)`
/// when `signed`, else `nu = mu`.
pub fn partial_sum(
    f: &LatticeFunction,
    b: u64,
    cfg: &TransformConfig,
    signed: bool,
) -> Result<LatticeFunction> {
    let last = cfg.scale_index(b)?;
    let mut acc = LatticeFunction::zero();
    for i in 0..=last {
        acc = &acc + &cfg.convolve(i, f, signed)?;
    }
    Ok(acc)
}

/// `H_M f`.
pub fn transform(f: &LatticeFunction, cfg: &TransformConfig) -> Result<LatticeFunction> {
    partial_sum(f, cfg.m(), cfg, true)
}

/// `max_B |sum_{N <= B} nu_N * g_N|` for per-scale inputs `g_N`, computed
/// with a running sum and a running maximum in increasing `N`.
pub fn max_partial_sums(
    inputs: &[LatticeFunction],
    cfg: &TransformConfig,
    signed: bool,
) -> Result<LatticeFunction> {
    if inputs.len() != cfg.scales().len() {
        return Err(invalid(
            "inputs",
            format!("{} inputs for {} scales", inputs.len(), cfg.scales().len()),
        ));
    }
    let mut acc = LatticeFunction::zero();
    let mut best = LatticeFunction::zero();
    for (i, g) in inputs.iter().enumerate() {
        acc = &acc + &cfg.convolve(i, g, signed)?;
        best = best.zip_with(&acc, |m, v| m.max(v.abs()));
    }
    Ok(best)
}

/// `H_M^* f`.
pub fn h_max(f: &LatticeFunction, cfg: &TransformConfig) -> Result<LatticeFunction> {
    let inputs = vec![f.clone(); cfg.scales().len()];
    max_partial_sums(&inputs, cfg, true)
}

/// `H_M^* f` recomputing every partial sum from scratch; the oracle for
/// [`h_max`].
pub fn h_max_bruteforce(f: &LatticeFunction, cfg: &TransformConfig) -> Result<LatticeFunction> {
    let mut best = LatticeFunction::zero();
    for &b in cfg.scales() {
        let s = partial_sum(f, b, cfg, true)?;
        best = best.zip_with(&s, |m, v| m.max(v.abs()));
    }
    Ok(best)
}

/// `#{x : |g(x)| > lam}`.
pub fn level_set_size(g: &LatticeFunction, lam: f64) -> Result<u64> {
    if !(lam > 0.0) {
        return Err(invalid("lambda", format!("{lam} is not positive")));
    }
    Ok(g.values().iter().filter(|v| v.abs() > lam).count() as u64)
}

/// `lam * |{H_M^* f > lam}| / ||f||_1`.
pub fn weak11_ratio(f: &LatticeFunction, cfg: &TransformConfig, lam: f64) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::ZeroFunction);
    }
    let h = h_max(f, cfg)?;
    Ok(lam * level_set_size(&h, lam)? as f64 / f.l1_norm())
}

/// Weak-type ratios of one fixed output `g` against many thresholds.
#[derive(Clone, Debug)]
pub struct WeakProfile {
    /// `|g|` in increasing order.
    sorted: Vec<f64>,
    norm: f64,
}

impl WeakProfile {
    /// `g` is the operator output, `norm` the `l^1` norm of the input.
    pub fn new(g: &LatticeFunction, norm: f64) -> Result<Self> {
        if !(norm > 0.0) {
            return Err(Error::ZeroFunction);
        }
        let mut sorted: Vec<f64> = g.values().iter().map(|v| v.abs()).collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, norm })
    }

    pub fn level_set_size(&self, lam: f64) -> u64 {
        (self.sorted.len() - self.sorted.partition_point(|&v| v <= lam)) as u64
    }

    pub fn ratio(&self, lam: f64) -> f64 {
        lam * self.level_set_size(lam) as f64 / self.norm
    }

    /// Largest ratio over `grid` and the threshold attaining it.
    pub fn sup(&self, grid: &[f64]) -> (f64, f64) {
        grid.iter()
            .map(|&lam| (lam, self.ratio(lam)))
            .fold((f64::NAN, 0.0), |best, cur| {
                if cur.1 > best.1 || best.0.is_nan() {
                    cur
                } else {
                    best
                }
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{antisymmetric_part, default_bump};
    use proptest::prelude::*;

    fn small_cfg() -> TransformConfig {
        TransformConfig::new(16, 0.5, 1.001, default_bump()).unwrap()
    }

    #[test]
    fn scale_cutoff() {
        let cfg = small_cfg();
        assert_eq!(cfg.scales(), &[4, 8, 16]);
        let cfg = TransformConfig::new(1 << 10, 0.8, 1.001, default_bump()).unwrap();
        assert_eq!(cfg.scales(), &[256, 512, 1024]);
        assert!(TransformConfig::new(12, 0.5, 1.001, default_bump()).is_err());
        assert!(TransformConfig::new(16, 1.0, 1.001, default_bump()).is_err());
    }

    #[test]
    fn partial_sum_of_delta_is_the_measure() {
        let cfg = small_cfg();
        let g = partial_sum(&LatticeFunction::delta(0, 1.0), 4, &cfg, true).unwrap();
        let nu = antisymmetric_part(4, 1.001, default_bump()).unwrap();
        assert_eq!(&g, nu.as_function());
        assert!(partial_sum(&LatticeFunction::zero(), 16, &cfg, true)
            .unwrap()
            .is_empty());
        assert!(matches!(
            partial_sum(&LatticeFunction::delta(0, 1.0), 2, &cfg, true),
            Err(Error::ScaleOutOfRange(2))
        ));
    }

    #[test]
    fn partial_sums_are_additive() {
        let cfg = small_cfg();
        let f = LatticeFunction::from_pairs([(0, 1.0), (3, -2.0), (11, 0.5)]);
        let s4 = partial_sum(&f, 4, &cfg, true).unwrap();
        let s16 = partial_sum(&f, 16, &cfg, true).unwrap();
        let tail = &cfg.convolve(1, &f, true).unwrap() + &cfg.convolve(2, &f, true).unwrap();
        assert!((&(&s16 - &s4) - &tail).sup_norm() < 1e-15);
    }

    #[test]
    fn h_max_of_delta() {
        let cfg = small_cfg();
        let f = LatticeFunction::delta(0, 1.0);
        let h = h_max(&f, &cfg).unwrap();
        assert_eq!(h, h_max_bruteforce(&f, &cfg).unwrap());
        // Prefix oracle: max over B of |sum_{N <= B} nu_N(x)| site by site.
        for x in -70..=70 {
            let mut run = 0.0;
            let mut best: f64 = 0.0;
            for i in 0..cfg.scales().len() {
                run += cfg.nu(i).weight_at(x);
                best = best.max(f64::abs(run));
            }
            assert_eq!(h.get(x), best, "site {x}");
        }
        assert!(h_max(&LatticeFunction::zero(), &cfg).unwrap().is_empty());
        let full = transform(&f, &cfg).unwrap();
        for (x, v) in full.iter() {
            assert!(h.get(x) >= v.abs());
        }
    }

    #[test]
    fn single_scale_reduces_to_one_convolution() {
        let cfg = TransformConfig::new(16, 0.99, 1.001, default_bump()).unwrap();
        assert_eq!(cfg.scales(), &[16]);
        let f = LatticeFunction::from_pairs([(0, 1.0), (5, -1.0)]);
        let expect = cfg.convolve(0, &f, true).unwrap().abs();
        assert_eq!(h_max_bruteforce(&f, &cfg).unwrap(), expect);
        assert_eq!(h_max(&f, &cfg).unwrap(), expect);
    }

    #[test]
    fn level_sets() {
        let g = LatticeFunction::from_pairs([(0, 2.0)]);
        assert_eq!(level_set_size(&g, 1.0).unwrap(), 1);
        assert_eq!(level_set_size(&g, 2.0).unwrap(), 0);
        let g = LatticeFunction::from_pairs([(0, 2.0), (3, -5.0)]);
        assert_eq!(level_set_size(&g, 1.0).unwrap(), 2);
        assert!(level_set_size(&g, 0.0).is_err());
        let p = WeakProfile::new(&g, 1.0).unwrap();
        assert_eq!(p.level_set_size(2.0), 1);
        assert_eq!(p.ratio(1.0), 2.0);
        assert_eq!(p.sup(&[1.0, 4.0, 6.0]), (4.0, 4.0));
    }

    #[test]
    fn weak_ratio_edge_cases() {
        let cfg = TransformConfig::new(16, 0.5, 1.001, BumpFunction::Zero).unwrap();
        assert_eq!(
            weak11_ratio(&LatticeFunction::delta(3, 1.0), &cfg, 0.1).unwrap(),
            0.0
        );
        assert!(matches!(
            weak11_ratio(&LatticeFunction::zero(), &small_cfg(), 0.1),
            Err(Error::ZeroFunction)
        ));
    }

    proptest! {
        #[test]
        fn translation_equivariance(pairs in proptest::collection::vec((-60i64..60, -3.0f64..3.0), 1..10),
                                    k in -1000i64..1000, lam in 0.001f64..0.5) {
            let cfg = small_cfg();
            let f = LatticeFunction::from_pairs(pairs);
            prop_assume!(!f.is_empty());
            let h = h_max(&f, &cfg).unwrap();
            let ht = h_max(&f.translate(k), &cfg).unwrap();
            prop_assert_eq!(h.translate(k), ht);
            let r = weak11_ratio(&f, &cfg, lam).unwrap();
            prop_assert_eq!(r, weak11_ratio(&f.translate(k), &cfg, lam).unwrap());
        }

        #[test]
        fn linearity(p in proptest::collection::vec((-60i64..60, -3.0f64..3.0), 1..10),
                     q in proptest::collection::vec((-60i64..60, -3.0f64..3.0), 1..10),
                     a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let cfg = small_cfg();
            let (f, g) = (LatticeFunction::from_pairs(p), LatticeFunction::from_pairs(q));
            let lhs = partial_sum(&(&f.scale(a) + &g.scale(b)), 16, &cfg, true).unwrap();
            let rhs = &partial_sum(&f, 16, &cfg, true).unwrap().scale(a)
                + &partial_sum(&g, 16, &cfg, true).unwrap().scale(b);
            let scale = (a.abs() * f.l1_norm() + b.abs() * g.l1_norm()).max(1e-300);
            prop_assert!((&lhs - &rhs).sup_norm() <= 1e-12 * scale);
        }

        #[test]
        fn h_max_matches_oracle(pairs in proptest::collection::vec((-200i64..200, -3.0f64..3.0), 1..20)) {
            let cfg = TransformConfig::new(64, 0.5, 1.001, default_bump()).unwrap();
            let f = LatticeFunction::from_pairs(pairs);
            prop_assert_eq!(h_max(&f, &cfg).unwrap(), h_max_bruteforce(&f, &cfg).unwrap());
        }
    }
}
