use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::lattice::Interval;
use crate::measures::BumpFunction;
use crate::numeric::is_dyadic;
use crate::operators::TransformConfig;

use super::generate::Family;

/// Largest `alpha` accepted without `allow_alpha`.
pub const ALPHA_CAP: f64 = 1.001;

/// Everything a sweep or a lemma-suite run depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub m_list: Vec<u64>,
    /// Points per decade of the threshold grid.
    pub lambda_per_decade: usize,
    /// The four-term pipeline runs at every `term_stride`-th threshold.
    pub term_stride: usize,
    pub bump: BumpFunction,
    pub families: Vec<Family>,
    pub seed: u64,
    /// Seeds `seed, seed + 1, ...` per cell.
    pub seeds: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub allow_alpha: bool,
    /// Random instances per lemma in the lemma suite.
    pub instances: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 1.001,
            theta: 0.8,
            epsilon: 0.05,
            m_list: vec![1 << 10, 1 << 12, 1 << 14, 1 << 16],
            lambda_per_decade: 12,
            term_stride: 4,
            bump: BumpFunction::Standard,
            families: vec![Family::Delta, Family::SpacedDeltas, Family::CzStress],
            seed: 0,
            seeds: 1,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            output_dir: PathBuf::from("out"),
            allow_alpha: false,
            instances: 1000,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| Error::Parse {
        line,
        reason: format!("{key}: {e}"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Parse {
            line,
            reason: format!("{key}: `{other}` is not a boolean"),
        }),
    }
}

/// Comma-separated list.
pub fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, T::Err> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

impl ExperimentConfig {
    /// Applies `key = value` lines on top of `self`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected key=value, got `{trimmed}`"),
                });
            };
            self.set(line, key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let list_err = |e: String| Error::Parse {
            line,
            reason: format!("{key}: {e}"),
        };
        match key {
            "alpha" => self.alpha = parse_num(line, key, value)?,
            "theta" => self.theta = parse_num(line, key, value)?,
            "epsilon" => self.epsilon = parse_num(line, key, value)?,
            "M" | "m_list" => {
                self.m_list = parse_list(value)
                    .map_err(|e: std::num::ParseIntError| list_err(e.to_string()))?
            }
            "lambda_per_decade" => self.lambda_per_decade = parse_num(line, key, value)?,
            "term_stride" => self.term_stride = parse_num(line, key, value)?,
            "bump" => self.bump = value.parse()?,
            "family" | "families" => self.families = parse_list(value)?,
            "seed" => self.seed = parse_num(line, key, value)?,
            "seeds" => self.seeds = parse_num(line, key, value)?,
            "workers" => self.workers = parse_num(line, key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            "allow_alpha" => self.allow_alpha = parse_bool(line, key, value)?,
            "instances" => self.instances = parse_num(line, key, value)?,
            other => {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(invalid(
                "alpha",
                format!("{} is outside (1, 2)", self.alpha),
            ));
        }
        if self.alpha > ALPHA_CAP && !self.allow_alpha {
            return Err(invalid(
                "alpha",
                format!("{} exceeds {ALPHA_CAP}; pass --allow-alpha", self.alpha),
            ));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid(
                "theta",
                format!("{} is outside (0, 1)", self.theta),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.theta / 2.0) {
            return Err(invalid(
                "epsilon",
                format!("{} is outside (0, theta/2)", self.epsilon),
            ));
        }
        if self.m_list.is_empty() {
            return Err(invalid("M", "empty list"));
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m < 4 || !is_dyadic(m)) {
            return Err(invalid("M", format!("{m} is not a dyadic integer >= 4")));
        }
        if self.families.is_empty() {
            return Err(invalid("family", "empty list"));
        }
        for (name, v) in [
            ("lambda_per_decade", self.lambda_per_decade),
            ("term_stride", self.term_stride),
            ("workers", self.workers),
            ("seeds", self.seeds as usize),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn transform_config(&self, m: u64) -> Result<TransformConfig> {
        TransformConfig::new(m, self.theta, self.alpha, self.bump)
    }

    /// `|J| = 2^round((theta - eps) log2 M)`.
    pub fn j_len(&self, m: u64) -> u64 {
        let e = ((self.theta - self.epsilon) * (m as f64).log2()).round();
        1u64 << (e.max(0.0) as u32)
    }

    /// `[-ceil(4 M^alpha), ceil(4 M^alpha)]`.
    pub fn window(&self, m: u64) -> Interval {
        Interval::centered(0, (4.0 * (m as f64).powf(self.alpha)).ceil() as u64)
    }

    /// Cubes of length at most `M^(theta - 2 eps)` are purged.
    pub fn purge_threshold(&self, m: u64) -> f64 {
        (m as f64).powf(self.theta - 2.0 * self.epsilon)
    }

    /// Log-spaced thresholds from `lo` to `hi`, at least
    /// `lambda_per_decade` per decade, both ends included.
    pub fn lambda_grid(&self, lo: f64, hi: f64) -> Vec<f64> {
        if !(lo > 0.0 && hi > lo) {
            return if lo > 0.0 { vec![lo] } else { Vec::new() };
        }
        let steps = (self.lambda_per_decade as f64 * (hi / lo).log10())
            .ceil()
            .max(1.0) as usize;
        (0..=steps)
            .map(|k| lo * (hi / lo).powf(k as f64 / steps as f64))
            .collect()
    }

    /// One line per field, for report headers.
    pub fn describe(&self) -> String {
        let families: Vec<String> = self.families.iter().map(Family::to_string).collect();
        let ms: Vec<String> = self.m_list.iter().map(u64::to_string).collect();
        format!(
            "alpha={} theta={} epsilon={} M={} lambda_per_decade={} term_stride={} bump={} family={} seed={} seeds={} instances={}",
            self.alpha,
            self.theta,
            self.epsilon,
            ms.join(","),
            self.lambda_per_decade,
            self.term_stride,
            self.bump,
            families.join(","),
            self.seed,
            self.seeds,
            self.instances
        )
    }
}
