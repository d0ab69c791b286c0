use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeFunction;
use crate::numeric::curve_floor;

/// Named input generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// `delta_0`.
    Delta,
    /// Unit spikes at `[m_j^alpha]` for random distinct `m_j` in `[N_min, M]`.
    SpacedDeltas,
    /// Spikes of random height in `[0.5, 1.5)` with gaps of random length
    /// in `[s, 2s)`, centred on zero.
    CzStress,
    /// Uniform values in `[0, 1)` on `[0, N_min)`.
    UniformRandom,
    /// The inner family rescaled to unit `l^1` norm.
    NormalizedL1(Box<Family>),
}

/// Number of spikes in the spike families.
pub const SPIKES: usize = 16;
pub const STRESS_SPIKES: usize = 32;

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Delta => "delta".into(),
            Family::SpacedDeltas => "spaced-deltas".into(),
            Family::CzStress => "cz-stress".into(),
            Family::UniformRandom => "uniform-random".into(),
            Family::NormalizedL1(inner) => format!("normalized-l1:{}", inner.name()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Family::Delta),
            "spaced-deltas" => Ok(Family::SpacedDeltas),
            "cz-stress" => Ok(Family::CzStress),
            "uniform-random" => Ok(Family::UniformRandom),
            "normalized-l1" => Ok(Family::NormalizedL1(Box::new(Family::UniformRandom))),
            other => match other.strip_prefix("normalized-l1:") {
                Some(inner) => Ok(Family::NormalizedL1(Box::new(inner.parse()?))),
                None => Err(Error::UnknownFamily(other.to_string())),
            },
        }
    }
}

/// Size parameters of a generated input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputShape {
    pub m: u64,
    pub alpha: f64,
    /// Smallest active scale.
    pub n_min: u64,
}

/// `f / ||f||_1`.
pub fn normalize_l1(f: &LatticeFunction) -> Result<LatticeFunction> {
    let norm = f.l1_norm();
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(f.scale(1.0 / norm))
}

/// Deterministic in `(family, shape, seed)`.
pub fn generate_input(family: &Family, shape: &InputShape, seed: u64) -> Result<LatticeFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = match family {
        Family::Delta => LatticeFunction::delta(0, 1.0),
        Family::SpacedDeltas => {
            let (lo, hi) = (shape.n_min, shape.m.max(shape.n_min));
            let count = SPIKES.min((hi - lo + 1) as usize);
            let mut ms: Vec<u64> = Vec::with_capacity(count);
            while ms.len() < count {
                let m = rng.random_range(lo..=hi);
                if !ms.contains(&m) {
                    ms.push(m);
                }
            }
            LatticeFunction::from_pairs(ms.into_iter().map(|m| (curve_floor(m, shape.alpha), 1.0)))
        }
        Family::CzStress => {
            // Gaps near n_min / 4, capped so that the spikes stay within
            // about M^alpha of the origin.
            let reach = (shape.m as f64).powf(shape.alpha) / STRESS_SPIKES as f64;
            let base = ((shape.n_min / 4) as f64).min(reach).max(1.0);
            let mut x = 0i64;
            let mut spikes = Vec::with_capacity(STRESS_SPIKES);
            for _ in 0..STRESS_SPIKES {
                spikes.push((x, rng.random_range(0.5..1.5)));
                x += (base * (1.0 + rng.random::<f64>())).floor() as i64;
            }
            let shift = spikes.last().map_or(0, |s| s.0) / 2;
            LatticeFunction::from_pairs(spikes.into_iter().map(|(x, h)| (x - shift, h)))
        }
        Family::UniformRandom => {
            let values: Vec<f64> = (0..shape.n_min).map(|_| rng.random::<f64>()).collect();
            LatticeFunction::from_dense(0, &values)
        }
        Family::NormalizedL1(inner) => normalize_l1(&generate_input(inner, shape, seed)?)?,
    };
    Ok(f)
}
