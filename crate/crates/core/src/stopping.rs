//! Stopping times, the averaged sequences `beta_N`, the error function
//! `ER`, the exceptional sets, and executable forms of the maximal lemmas
//! built on them.

use crate::error::{invalid, Result};
use crate::lattice::{conditional_expectation, DyadicInterval, IntervalFamily, LatticeFunction};
use crate::operators::TransformConfig;

/// Stopping times `N_j = max{2^k : sum_{N <= 2^k} beta_N <= j lambda0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StoppingSequence {
    pub lambda0: f64,
    pub scales: Vec<u64>,
    pub betas: Vec<f64>,
    /// `(j, N_j)` for every `j <= j_max` at which the maximum exists, up to
    /// the first `j` reaching the top scale.
    pub times: Vec<(usize, u64)>,
    pub j_max: usize,
    /// Some `N_{j+1} == N_j` below the top scale.
    pub stalled: bool,
}

impl StoppingSequence {
    pub fn stopping_scales(&self) -> Vec<u64> {
        self.times.iter().map(|t| t.1).collect()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.times.windows(2).all(|w| w[0].1 < w[1].1)
    }

    /// `C_2 = {N : beta_N > lambda0}`.
    pub fn large_scales(&self) -> Vec<u64> {
        self.scales
            .iter()
            .zip(&self.betas)
            .filter(|p| *p.1 > self.lambda0)
            .map(|p| *p.0)
            .collect()
    }
}

pub fn stopping_times(scales: &[u64], betas: &[f64], lambda0: f64) -> Result<StoppingSequence> {
    if scales.len() != betas.len() || scales.is_empty() {
        return Err(invalid("betas", "one beta per scale, at least one scale"));
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(invalid("lambda0", format!("{lambda0} is not positive")));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(invalid("betas", format!("{b} is not a nonnegative number")));
    }
    let mut prefix = Vec::with_capacity(betas.len());
    let mut run = 0.0;
    for b in betas {
        run += b;
        prefix.push(run);
    }
    let j_max = (run / lambda0).ceil() as usize + 1;
    let top = *scales.last().unwrap();
    let mut times: Vec<(usize, u64)> = Vec::new();
    let mut stalled = false;
    for j in 1..=j_max {
        let budget = j as f64 * lambda0;
        let count = prefix.partition_point(|&p| p <= budget);
        if count == 0 {
            continue;
        }
        let n = scales[count - 1];
        if let Some(&(_, prev)) = times.last() {
            if prev == n {
                stalled = true;
                continue;
            }
        }
        times.push((j, n));
        if n == top {
            break;
        }
    }
    Ok(StoppingSequence {
        lambda0,
        scales: scales.to_vec(),
        betas: betas.to_vec(),
        times,
        j_max,
        stalled,
    })
}

/// `F_N = mu_N * E goods_N` for every active scale, `E` over `cubes`.
pub fn averaged_fields(
    goods: &[LatticeFunction],
    cubes: &IntervalFamily,
    cfg: &TransformConfig,
) -> Result<Vec<LatticeFunction>> {
    if goods.len() != cfg.scales().len() {
        return Err(invalid("goods", "one function per active scale"));
    }
    goods
        .iter()
        .enumerate()
        .map(|(i, g)| cfg.convolve(i, &conditional_expectation(g, cubes), false))
        .collect()
}

/// `beta_N = (1/|J|) sum_{y in J} F_N(y)` for every scale.
pub fn betas_on(fields: &[LatticeFunction], window: &DyadicInterval) -> Vec<f64> {
    let iv = window.interval();
    fields
        .iter()
        .map(|f| f.sum_over(&iv) / window.len() as f64)
        .collect()
}

/// `beta_N` on `window` from the per-scale good functions.
pub fn build_beta(
    goods: &[LatticeFunction],
    cubes: &IntervalFamily,
    window: &DyadicInterval,
    cfg: &TransformConfig,
) -> Result<Vec<f64>> {
    Ok(betas_on(&averaged_fields(goods, cubes, cfg)?, window))
}

/// `beta` rows for every window of `windows`, indexed `[J][N]`.
pub fn beta_table(fields: &[LatticeFunction], windows: &IntervalFamily) -> Vec<Vec<f64>> {
    windows.iter().map(|j| betas_on(fields, j)).collect()
}

/// `ER = sum_N |F_N - E_J F_N|`, accumulated in increasing `N`.
pub fn error_function(fields: &[LatticeFunction], windows: &IntervalFamily) -> LatticeFunction {
    let mut er = LatticeFunction::zero();
    for f in fields {
        let dev = (f - &conditional_expectation(f, windows)).abs();
        er = &er + &dev;
    }
    er
}

/// Windows `J` whose summed `beta` reaches `threshold`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExceptionalSet {
    /// `A` for the sets `A_A`, `s` for the sets `A^s`.
    pub key: u64,
    pub threshold: f64,
    pub members: Vec<DyadicInterval>,
    /// Number of sites in the union of the members.
    pub measure: u64,
    /// `sum_J |J| sum_N beta_N(J)` over every window.
    pub mass: f64,
}

impl ExceptionalSet {
    /// The Chebyshev bound `mass / threshold`.
    pub fn bound(&self) -> f64 {
        self.mass / self.threshold
    }

    pub fn contains(&self, x: i64) -> bool {
        self.members.iter().any(|j| j.contains_point(x))
    }
}

/// `{x : sum_N E_J F_N(x) >= threshold}` read off the per-window sums;
/// `rows` is indexed `[J][N]` as in [`beta_table`].
pub fn exceptional_set(
    key: u64,
    rows: &[Vec<f64>],
    windows: &IntervalFamily,
    threshold: f64,
) -> ExceptionalSet {
    let mut members = Vec::new();
    let mut mass = 0.0;
    for (j, row) in windows.iter().zip(rows) {
        let total: f64 = row.iter().sum();
        mass += total * j.len() as f64;
        if total >= threshold {
            members.push(*j);
        }
    }
    let measure = members.iter().map(DyadicInterval::len).sum();
    ExceptionalSet {
        key,
        threshold,
        members,
        measure,
        mass,
    }
}

/// The sets `A_A` (threshold `lam A^2`) and `A^s` (threshold
/// `lam 2^{s eps}`).
pub fn exceptional_sets(
    by_a: &[(u64, Vec<Vec<f64>>)],
    by_s: &[(u32, Vec<Vec<f64>>)],
    lam: f64,
    eps: f64,
    windows: &IntervalFamily,
) -> (Vec<ExceptionalSet>, Vec<ExceptionalSet>) {
    let sets_a = by_a
        .iter()
        .map(|(a, rows)| {
            let a = *a as f64;
            exceptional_set(a as u64, rows, windows, lam * a * a)
        })
        .collect();
    let sets_s = by_s
        .iter()
        .map(|(s, rows)| exceptional_set(*s as u64, rows, windows, lam * (*s as f64 * eps).exp2()))
        .collect();
    (sets_a, sets_s)
}

/// One row of the exceptional-set report.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ExceptionalRow {
    pub j_start: i64,
    pub j_len: u64,
    pub key: u64,
    pub sum_beta: f64,
    pub in_set: bool,
    pub j_max: usize,
}

pub fn exceptional_rows(
    set: &ExceptionalSet,
    rows: &[Vec<f64>],
    windows: &IntervalFamily,
    lambda0: f64,
) -> Vec<ExceptionalRow> {
    windows
        .iter()
        .zip(rows)
        .map(|(j, row)| {
            let sum_beta: f64 = row.iter().sum();
            ExceptionalRow {
                j_start: j.start(),
                j_len: j.len(),
                key: set.key,
                sum_beta,
                in_set: sum_beta >= set.threshold,
                j_max: (sum_beta / lambda0).ceil() as usize + 1,
            }
        })
        .collect()
}

/// Outcome of the stopping-time implication at a set of sites.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseMaxReport {
    pub sites_checked: usize,
    /// Sites where `max_B |D_B| >= 4 lambda0`.
    pub hypothesis_fired: usize,
    /// Sites where the hypothesis held but `max_j |D_{N_j}| < lambda0`.
    pub violations: Vec<i64>,
    /// Some `beta_N > lambda0`: the check is not run.
    pub skipped: bool,
    /// `|C_2|`, the number of scales with `beta_N > lambda0`.
    pub large_scales: usize,
    pub j_max: usize,
}

/// Running differences `D_B(x) = sum_{N <= B} (mu_N * g_N(x) - beta_N)`
/// for every active `B`.
fn running_differences(convs: &[LatticeFunction], betas: &[f64], x: i64) -> Vec<f64> {
    let mut run = 0.0;
    convs
        .iter()
        .zip(betas)
        .map(|(c, b)| {
            run += c.get(x) - b;
            run
        })
        .collect()
}

/// Checks `max_B |D_B(x)| >= 4 lambda0  =>  max_j |D_{N_j}(x)| >= lambda0`
/// at each site of `sites`, where `D_B` is built from the nonnegative
/// per-scale functions `goods`.
pub fn check_sparse_max_lemma(
    goods: &[LatticeFunction],
    betas: &[f64],
    lambda0: f64,
    cfg: &TransformConfig,
    sites: &[i64],
) -> Result<SparseMaxReport> {
    if goods.len() != cfg.scales().len() {
        return Err(invalid("goods", "one function per active scale"));
    }
    if goods.iter().any(|g| !g.is_nonnegative()) {
        return Err(invalid("goods", "must be nonnegative"));
    }
    let seq = stopping_times(cfg.scales(), betas, lambda0)?;
    let mut report = SparseMaxReport {
        large_scales: seq.large_scales().len(),
        j_max: seq.j_max,
        ..Default::default()
    };
    if report.large_scales > 0 {
        report.skipped = true;
        return Ok(report);
    }
    let convs = goods
        .iter()
        .enumerate()
        .map(|(i, g)| cfg.convolve(i, g, false))
        .collect::<Result<Vec<_>>>()?;
    let stops: Vec<usize> = seq
        .times
        .iter()
        .map(|&(_, n)| cfg.scale_index(n))
        .collect::<Result<_>>()?;
    for &x in sites {
        report.sites_checked += 1;
        let d = running_differences(&convs, betas, x);
        if d.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 4.0 * lambda0 {
            continue;
        }
        report.hypothesis_fired += 1;
        let at_stops = stops.iter().fold(0.0f64, |m, &i| m.max(d[i].abs()));
        if at_stops < lambda0 {
            report.violations.push(x);
        }
    }
    Ok(report)
}

/// Branch frequencies of the bad-function form at the sites of a window
/// family.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BadFormReport {
    pub sites_checked: usize,
    /// Sites with `max_B |sum_{N <= B} mu_N * b_N| >= 4 lambda0`.
    pub hypothesis_fired: usize,
    /// ... of which `max_j |sum_{N <= N_j} mu_N * b_N| >= lambda0 / 8`.
    pub stopping_branch: usize,
    /// ... of which only `ER(x) >= lambda0` holds.
    pub error_branch: usize,
    /// ... of which neither holds.
    pub neither: usize,
    /// Windows skipped because some `beta_N > lambda0`.
    pub skipped_windows: usize,
}

/// Evaluates the alternative "stopping-time maximum at least `lambda0/8`
/// or `ER(x) >= lambda0`" wherever the bad-function maximum reaches
/// `4 lambda0`. Here `b_N = goods_N - E goods_N`, and the stopping times of
/// each window use that window's `beta`.
pub fn check_bad_form(
    goods: &[LatticeFunction],
    cubes: &IntervalFamily,
    windows: &IntervalFamily,
    lambda0: f64,
    cfg: &TransformConfig,
) -> Result<BadFormReport> {
    let fields = averaged_fields(goods, cubes, cfg)?;
    let convs = goods
        .iter()
        .enumerate()
        .map(|(i, g)| cfg.convolve(i, g, false))
        .collect::<Result<Vec<_>>>()?;
    let er = error_function(&fields, windows);
    let mut report = BadFormReport::default();
    for j in windows {
        let betas = betas_on(&fields, j);
        let seq = stopping_times(cfg.scales(), &betas, lambda0)?;
        if !seq.large_scales().is_empty() {
            report.skipped_windows += 1;
            continue;
        }
        let stops: Vec<usize> = seq
            .times
            .iter()
            .map(|&(_, n)| cfg.scale_index(n))
            .collect::<Result<_>>()?;
        let iv = j.interval();
        let mut sites: Vec<i64> = convs
            .iter()
            .chain(&fields)
            .flat_map(|c| c.restrict(&iv).sites().to_vec())
            .collect();
        sites.sort_unstable();
        sites.dedup();
        for x in sites {
            report.sites_checked += 1;
            let mut run = 0.0;
            let bad: Vec<f64> = convs
                .iter()
                .zip(&fields)
                .map(|(c, f)| {
                    run += c.get(x) - f.get(x);
                    run
                })
                .collect();
            if bad.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 4.0 * lambda0 {
                continue;
            }
            report.hypothesis_fired += 1;
            let at_stops = stops.iter().fold(0.0f64, |m, &i| m.max(bad[i].abs()));
            if at_stops >= lambda0 / 8.0 {
                report.stopping_branch += 1;
            } else if er.get(x) >= lambda0 {
                report.error_branch += 1;
            } else {
                report.neither += 1;
            }
        }
    }
    Ok(report)
}
