//! The curve measures
//!
//! ```text
//! mu_N = sum_{N <= m <= 2N} phi(m/N) / m * delta_{[m^alpha]}
//! ```
//!
//! together with their reflections, antisymmetric parts and off-diagonal
//! autocorrelations.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::lattice::{Interval, LatticeFunction};
use crate::numeric::{curve_floor, exact_sum, is_dyadic};

/// Smooth bump supported in `(1, 2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BumpFunction {
    /// `exp(4 - 1/((t-1)(2-t)))` on `(1, 2)`, equal to 1 at `t = 1.5`.
    #[default]
    Standard,
    /// Identically zero; useful to switch every measure off.
    Zero,
}

impl BumpFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            BumpFunction::Zero => 0.0,
            BumpFunction::Standard => {
                if t <= 1.0 || t >= 2.0 {
                    return 0.0;
                }
                (4.0 - 1.0 / ((t - 1.0) * (2.0 - t))).exp()
            }
        }
    }

    /// `phi_J(y)`: the bump moved onto the window `J`, so that the
    /// centre of `J` sits at `t = 1.5` and `J` maps onto `[1, 2)`.
    pub fn on_window(&self, window: &Interval, y: i64) -> f64 {
        let len = window.len() as f64;
        self.eval(1.5 + (y as f64 - window.center()) / len)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BumpFunction::Standard => "standard",
            BumpFunction::Zero => "zero",
        }
    }
}

impl fmt::Display for BumpFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BumpFunction {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "default" => Ok(BumpFunction::Standard),
            "zero" => Ok(BumpFunction::Zero),
            other => Err(invalid("bump", format!("unknown bump `{other}`"))),
        }
    }
}

pub fn default_bump() -> BumpFunction {
    BumpFunction::Standard
}

/// Finitely supported signed atomic measure on the integers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointMassMeasure {
    atoms: LatticeFunction,
}

impl PointMassMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Atoms at repeated sites are merged by adding their weights.
    pub fn from_atoms<I: IntoIterator<Item = (i64, f64)>>(atoms: I) -> Self {
        Self {
            atoms: LatticeFunction::from_pairs(atoms),
        }
    }

    pub fn from_function(f: LatticeFunction) -> Self {
        Self { atoms: f }
    }

    /// The measure viewed as a function `site -> weight`.
    pub fn as_function(&self) -> &LatticeFunction {
        &self.atoms
    }

    pub fn sites(&self) -> &[i64] {
        self.atoms.sites()
    }

    pub fn weights(&self) -> &[f64] {
        self.atoms.values()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weight_at(&self, site: i64) -> f64 {
        self.atoms.get(site)
    }

    /// Correctly rounded total mass; exactly zero for odd measures.
    pub fn total_mass(&self) -> f64 {
        exact_sum(self.weights().iter().copied())
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.l1_norm()
    }

    pub fn support_hull(&self) -> Option<Interval> {
        self.atoms.support_hull()
    }

    pub fn reflect(&self) -> Self {
        Self {
            atoms: self.atoms.reflect(),
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self {
            atoms: &self.atoms - &other.atoms,
        }
    }
}

fn check_curve_params(n: u64, alpha: f64) -> Result<()> {
    if n < 2 || !is_dyadic(n) {
        return Err(invalid("N", format!("{n} is not a dyadic integer >= 2")));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(invalid("alpha", format!("{alpha} is outside (1, 2)")));
    }
    Ok(())
}

/// `mu_N` for a dyadic `N >= 2`.
pub fn mu(n: u64, alpha: f64, phi: BumpFunction) -> Result<PointMassMeasure> {
    check_curve_params(n, alpha)?;
    let nf = n as f64;
    let atoms = (n..=2 * n).filter_map(|m| {
        let w = phi.eval(m as f64 / nf) / m as f64;
        (w != 0.0).then(|| (curve_floor(m, alpha), w))
    });
    Ok(PointMassMeasure::from_atoms(atoms))
}

/// `mu_N - reflect(mu_N)`.
pub fn antisymmetric_part(n: u64, alpha: f64, phi: BumpFunction) -> Result<PointMassMeasure> {
    let m = mu(n, alpha, phi)?;
    Ok(m.difference(&m.reflect()))
}

/// `sup_{x != 0} |(m * reflect(m))(x)|`, by a direct double sum over atom
/// pairs.
pub fn offdiag_autocorrelation_sup(m: &PointMassMeasure) -> f64 {
    let Some(hull) = m.support_hull() else {
        return 0.0;
    };
    let span = hull.len() as usize;
    // Index d + span - 1 holds the correlation at lag d.
    let mut acc = vec![0.0; 2 * span - 1];
    for (s, ws) in m.iter() {
        for (t, wt) in m.iter() {
            acc[(s - t + span as i64 - 1) as usize] += ws * wt;
        }
    }
    acc.iter()
        .enumerate()
        .filter(|&(i, _)| i != span - 1)
        .fold(0.0, |best, (_, v)| best.max(v.abs()))
}

/// Empirical constant `N^alpha * sup_{x != 0} |mu_N * reflect(mu_N)(x)|`.
pub fn autocorrelation_offdiag_sup(n: u64, alpha: f64, phi: BumpFunction) -> Result<f64> {
    let m = mu(n, alpha, phi)?;
    Ok((n as f64).powf(alpha) * offdiag_autocorrelation_sup(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bump_values() {
        let phi = default_bump();
        assert_eq!(phi.eval(1.5), 1.0);
        assert_eq!(phi.eval(1.0), 0.0);
        assert_eq!(phi.eval(2.0), 0.0);
        assert_eq!(phi.eval(0.3), 0.0);
        let expected = (4.0f64 - 16.0 / 3.0).exp();
        assert!((phi.eval(1.25) - expected).abs() < 1e-15);
        assert!((phi.eval(1.25) - 0.2636).abs() < 1e-4);
        for i in 10..990 {
            let v = phi.eval(1.0 + i as f64 / 1000.0);
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn window_bump_peaks_at_centre() {
        let phi = default_bump();
        let j = Interval::new(-2, 2).unwrap();
        assert_eq!(phi.on_window(&j, 0), 1.0);
        assert_eq!(phi.on_window(&j, -2), 0.0);
        assert!(phi.on_window(&j, 1) > 0.0);
        assert_eq!(phi.on_window(&j, 2), 0.0);
    }

    #[test]
    fn mu_small_example() {
        let phi = default_bump();
        let m = mu(4, 1.001, phi).unwrap();
        assert_eq!(m.sites(), &[5, 6, 7]);
        let expected = [phi.eval(1.25) / 5.0, 1.0 / 6.0, phi.eval(1.75) / 7.0];
        for (w, e) in m.weights().iter().zip(expected) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!((m.weights()[0] - 0.05272).abs() < 1e-5);
        assert!((m.weights()[2] - 0.03766).abs() < 1e-5);
        assert!(mu(4, 1.001, BumpFunction::Zero).unwrap().is_empty());
    }

    #[test]
    fn mu_rejects_bad_parameters() {
        assert!(mu(6, 1.001, default_bump()).is_err());
        assert!(mu(1, 1.001, default_bump()).is_err());
        assert!(mu(8, 1.0, default_bump()).is_err());
        assert!(mu(8, f64::NAN, default_bump()).is_err());
    }

    #[test]
    fn mu_support_and_weights() {
        let alpha = 1.001;
        for k in 1..=14 {
            let n = 1u64 << k;
            let m = mu(n, alpha, default_bump()).unwrap();
            let upper = (2.0 * n as f64).powf(alpha) + 1.0;
            for (s, w) in m.iter() {
                assert!(s >= n as i64 && (s as f64) < upper);
                assert!(w > 0.0 && w <= 1.0 / n as f64);
            }
            assert!(m.len() as u64 <= n + 1);
        }
    }

    #[test]
    fn no_site_collisions_up_to_2_pow_20() {
        // Consecutive values m^alpha differ by more than 1 for alpha > 1, so
        // the floors are distinct; checked rather than assumed.
        let n = 1u64 << 20;
        let floors: Vec<i64> = (n..=2 * n).map(|k| curve_floor(k, 1.001)).collect();
        assert!(floors.windows(2).all(|w| w[0] < w[1]));
        let m = mu(n, 1.001, default_bump()).unwrap();
        let live = (n..=2 * n)
            .filter(|&k| default_bump().eval(k as f64 / n as f64) / k as f64 != 0.0)
            .count();
        assert_eq!(m.len(), live);
    }

    #[test]
    fn total_mass_matches_integral() {
        // Composite Simpson rule for int_1^2 phi(t)/t dt on a fine grid.
        let phi = default_bump();
        let steps = 200_000;
        let h = 1.0 / steps as f64;
        let g = |t: f64| phi.eval(t) / t;
        let mut integral = g(1.0) + g(2.0);
        for i in 1..steps {
            let t = 1.0 + i as f64 * h;
            integral += if i % 2 == 1 { 4.0 } else { 2.0 } * g(t);
        }
        integral *= h / 3.0;
        let n = 1u64 << 12;
        let mass = mu(n, 1.001, phi).unwrap().total_mass();
        assert!(
            (mass - integral).abs() < 1.0 / n as f64,
            "{mass} vs {integral}"
        );
    }

    #[test]
    fn antisymmetric_part_is_odd_with_zero_mass() {
        let nu = antisymmetric_part(4, 1.001, default_bump()).unwrap();
        assert_eq!(nu.sites(), &[-7, -6, -5, 5, 6, 7]);
        for &s in nu.sites() {
            assert_eq!(nu.weight_at(-s), -nu.weight_at(s));
        }
        assert_eq!(nu.weight_at(0), 0.0);
        assert_eq!(nu.total_mass(), 0.0);
        for k in 2..12 {
            let nu = antisymmetric_part(1 << k, 1.001, default_bump()).unwrap();
            assert_eq!(nu.total_mass(), 0.0);
        }
    }

    #[test]
    fn reflect_examples() {
        let m = PointMassMeasure::from_atoms([(5, 0.1)]);
        assert_eq!(m.reflect(), PointMassMeasure::from_atoms([(-5, 0.1)]));
        assert!(PointMassMeasure::empty().reflect().is_empty());
    }

    #[test]
    fn autocorrelation_small_cases() {
        let single = PointMassMeasure::from_atoms([(9, 0.5)]);
        assert_eq!(offdiag_autocorrelation_sup(&single), 0.0);

        // Brute force over the three-atom measure of N = 4.
        let m = mu(4, 1.001, default_bump()).unwrap();
        let w: Vec<(i64, f64)> = m.iter().collect();
        let mut best: f64 = 0.0;
        for d in -4i64..=4 {
            if d == 0 {
                continue;
            }
            let v: f64 = w
                .iter()
                .flat_map(|&(s, a)| w.iter().map(move |&(t, b)| (s - t, a * b)))
                .filter(|&(lag, _)| lag == d)
                .map(|p| p.1)
                .sum();
            best = best.max(v.abs());
        }
        assert_eq!(offdiag_autocorrelation_sup(&m), best);
        let c = autocorrelation_offdiag_sup(4, 1.001, default_bump()).unwrap();
        assert!((c - 4f64.powf(1.001) * best).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn reflect_is_involution(atoms in proptest::collection::vec((-100i64..100, -1.0f64..1.0), 0..30)) {
            let m = PointMassMeasure::from_atoms(atoms);
            prop_assert_eq!(m.reflect().reflect(), m);
        }
    }
}
