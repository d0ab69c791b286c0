use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::czdecomp::{
    cz_decompose, good_class_two, good_summed, purge_small_cubes, verify_key_cz, BadFamily,
};
use crate::error::{invalid, Result};
use crate::kernels::{band_width, kernel, probe_grid, split_diagonal, support_constant, ProbeCell};
use crate::lattice::{
    conditional_expectation, DyadicInterval, Interval, IntervalFamily, LatticeFunction,
};
use crate::measures::autocorrelation_offdiag_sup;
use crate::numeric::dyadic_range;
use crate::operators::{four_term_split, TransformConfig};
use crate::squarefn::{block_for, menshov_check, square_function_sides, BadTerm, ProbeConstants};
use crate::stopping::{
    averaged_fields, beta_table, check_bad_form, check_sparse_max_lemma, exceptional_sets,
};

use super::config::ExperimentConfig;

/// One line of the report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteLine {
    pub lemma: String,
    /// Whether violations are expected to be zero.
    pub asserted: bool,
    pub instances: usize,
    /// Number of individual implications or sites examined.
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
}

impl SuiteLine {
    pub fn passed(&self) -> bool {
        !self.asserted || self.violations == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub header: String,
    pub lines: Vec<SuiteLine>,
    /// Free-form constant tables, appended to the text report.
    pub tables: Vec<String>,
}

impl SuiteReport {
    pub fn total_violations(&self) -> usize {
        self.lines
            .iter()
            .filter(|l| l.asserted)
            .map(|l| l.violations)
            .sum()
    }

    pub fn line(&self, lemma: &str) -> Option<&SuiteLine> {
        self.lines.iter().find(|l| l.lemma == lemma)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.header);
        for l in &self.lines {
            let status = match (l.asserted, l.passed()) {
                (false, _) => "REPORT",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            let _ = writeln!(
                out,
                "{status} {} instances={} checked={} violations={} {}",
                l.lemma, l.instances, l.checked, l.violations, l.detail
            );
        }
        for t in &self.tables {
            out.push('\n');
            out.push_str(t);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for l in &self.lines {
            w.serialize(l)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `lemma_suite.txt` and `lemma_suite.csv` under `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("lemma_suite.txt"), self.to_text())?;
        self.write_csv(&dir.join("lemma_suite.csv"))
    }
}

/// Counts returned by one instance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub checked: usize,
    pub violations: usize,
    /// Lemma-specific extra quantity (hypothesis firings, a maximum, ...).
    pub extra: f64,
}

fn rng_for(seed: u64, lemma: u64, idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((lemma << 32) | idx as u64);
    rng
}

/// Runs `instances` independent draws in parallel and returns them in
/// index order.
fn run_instances<T, F>(seed: u64, lemma: u64, instances: usize, body: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..instances)
        .into_par_iter()
        .map(|i| body(&mut rng_for(seed, lemma, i)))
        .collect()
}

fn fold(lemma: &str, asserted: bool, tallies: &[Tally], detail: String) -> SuiteLine {
    SuiteLine {
        lemma: lemma.to_string(),
        asserted,
        instances: tallies.len(),
        checked: tallies.iter().map(|t| t.checked).sum(),
        violations: tallies.iter().map(|t| t.violations).sum(),
        detail,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp()
}

/// Nonnegative function with up to `max_support` sites in `[start, start + span)`
/// and heights spread over four decades.
pub fn random_function(
    rng: &mut ChaCha8Rng,
    max_support: usize,
    start: i64,
    span: u64,
) -> LatticeFunction {
    let count = rng.random_range(1..=max_support);
    LatticeFunction::from_pairs((0..count).map(|_| {
        (
            start + rng.random_range(0..span) as i64,
            log_uniform(rng, 1e-2, 1e2),
        )
    }))
}

/// Threshold between the mean over `span` and the sup of `f`.
fn random_lambda(rng: &mut ChaCha8Rng, f: &LatticeFunction, span: u64) -> f64 {
    let lo = f.l1_norm() / span as f64;
    let hi = f.sup_norm();
    if hi <= lo {
        return lo;
    }
    log_uniform(rng, lo, hi)
}

/// The two cube-size bounds for every `N` in `2^0..2^13` and `A` in `2^0..2^8`.
pub fn key_cz_instance(f: &LatticeFunction, lam: f64) -> Result<Tally> {
    let mut t = Tally::default();
    if f.is_empty() {
        return Ok(t);
    }
    let dec = cz_decompose(f, lam)?;
    for n in dyadic_range(0, 13) {
        for a in dyadic_range(0, 8) {
            let rep = verify_key_cz(f, &dec, lam, n, a)?;
            t.checked += rep.high_cubes + rep.band_cubes;
            t.violations += rep.violations();
        }
    }
    Ok(t)
}

/// The sparse maximal implication on spike goods; `extra` counts firings.
pub fn sparse_max_instance(
    goods: &[LatticeFunction],
    betas: &[f64],
    lambda0: f64,
    cfg: &TransformConfig,
) -> Result<Tally> {
    let mut sites: Vec<i64> = Vec::new();
    for (i, g) in goods.iter().enumerate() {
        sites.extend_from_slice(cfg.convolve(i, g, false)?.sites());
    }
    sites.sort_unstable();
    sites.dedup();
    let rep = check_sparse_max_lemma(goods, betas, lambda0, cfg, &sites)?;
    Ok(Tally {
        checked: rep.sites_checked,
        violations: rep.violations.len(),
        extra: rep.hypothesis_fired as f64,
    })
}

pub fn menshov_instance(a: &[f64]) -> Tally {
    let rep = menshov_check(a);
    Tally {
        checked: 1,
        violations: usize::from(!rep.holds()),
        extra: if rep.rhs > 0.0 {
            rep.lhs / rep.rhs
        } else {
            0.0
        },
    }
}

/// Relative reconstruction error of the four-term split after CZ and purge;
/// `extra` carries the error.
pub fn four_term_instance(
    f: &LatticeFunction,
    lam: f64,
    purge: f64,
    cfg: &TransformConfig,
) -> Result<Tally> {
    let mut t = Tally::default();
    if f.is_empty() {
        return Ok(t);
    }
    let dec = cz_decompose(f, lam)?;
    let purged = purge_small_cubes(f, &dec, purge);
    t.checked = 1;
    if purged.l1_norm() > f.l1_norm() {
        t.violations += 1;
    }
    if purged.is_empty() {
        return Ok(t);
    }
    let split = four_term_split(&purged, cfg, lam, dec.cubes())?;
    let rel = split.reconstruction_error(&purged) / purged.sup_norm();
    t.extra = rel;
    if !(rel <= 1e-12) {
        t.violations += 1;
    }
    Ok(t)
}

/// Per-window, per-scale fields of `f` at `lam`: the `A`-indexed and the
/// `s`-indexed good-function families.
struct FieldFamilies {
    by_a: Vec<(u64, Vec<LatticeFunction>)>,
    by_s: Vec<(u32, Vec<LatticeFunction>)>,
}

fn field_families(f: &LatticeFunction, lam: f64, cfg: &TransformConfig) -> Result<FieldFamilies> {
    let dec = cz_decompose(f, lam)?;
    let alpha = cfg.alpha();
    let mut by_a = Vec::new();
    let last = f.band_count(lam * cfg.m() as f64);
    let mut a = 1u64;
    while a <= last {
        let goods = cfg
            .scales()
            .iter()
            .map(|&n| {
                let d1 = good_summed(f, &dec, a, n, BadFamily::D1, lam, alpha)?;
                let d2 = good_summed(f, &dec, a, n, BadFamily::D2, lam, alpha)?;
                Ok(&d1 + &d2)
            })
            .collect::<Result<Vec<_>>>()?;
        by_a.push((a, averaged_fields(&goods, dec.cubes(), cfg)?));
        a *= 2;
    }
    let top = *cfg.scales().last().unwrap_or(&1);
    let mut by_s = Vec::new();
    for s in 0..=top.trailing_zeros() {
        let goods = cfg
            .scales()
            .iter()
            .map(|&n| {
                if s > n.trailing_zeros() {
                    Ok(LatticeFunction::zero())
                } else {
                    good_class_two(f, &dec, n, s, lam, alpha)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        by_s.push((s, averaged_fields(&goods, dec.cubes(), cfg)?));
    }
    Ok(FieldFamilies { by_a, by_s })
}

fn hull_of(fields: &[LatticeFunction]) -> Option<Interval> {
    fields
        .iter()
        .filter_map(LatticeFunction::support_hull)
        .reduce(|a, b| a.hull(&b))
}

/// `E_J F_N` takes the tabulated value `beta_N(J)` at every site of `J`,
/// with no tolerance.
pub fn beta_constancy_instance(fields: &[LatticeFunction], windows: &IntervalFamily) -> Tally {
    let table = beta_table(fields, windows);
    let mut t = Tally::default();
    for (col, f) in fields.iter().enumerate() {
        let avg = conditional_expectation(f, windows);
        for (j, row) in windows.iter().zip(&table) {
            for x in j.interval().sites() {
                t.checked += 1;
                if avg.get(x) != row[col] {
                    t.violations += 1;
                }
            }
        }
    }
    t
}

/// Structure of the exceptional sets: members are whole windows of the
/// grid, membership agrees with the per-window sums, the measure is the
/// sum of member lengths and obeys the Chebyshev bound.
pub fn exceptional_instance(
    by_a: &[(u64, Vec<Vec<f64>>)],
    by_s: &[(u32, Vec<Vec<f64>>)],
    lam: f64,
    eps: f64,
    windows: &IntervalFamily,
) -> Tally {
    let (sets_a, sets_s) = exceptional_sets(by_a, by_s, lam, eps, windows);
    let rows: Vec<&Vec<Vec<f64>>> = by_a
        .iter()
        .map(|r| &r.1)
        .chain(by_s.iter().map(|r| &r.1))
        .collect();
    let mut t = Tally::default();
    for (set, rows) in sets_a.iter().chain(&sets_s).zip(rows) {
        for m in &set.members {
            t.checked += 1;
            if !windows.members().contains(m) {
                t.violations += 1;
            }
        }
        for (j, row) in windows.iter().zip(rows) {
            let inside = row.iter().sum::<f64>() >= set.threshold;
            for x in [j.start(), j.end() - 1] {
                t.checked += 1;
                if set.contains(x) != inside {
                    t.violations += 1;
                }
            }
        }
        t.checked += 2;
        if set.measure != set.members.iter().map(DyadicInterval::len).sum::<u64>() {
            t.violations += 1;
        }
        if set.measure as f64 > set.bound() * (1.0 + 1e-12) {
            t.violations += 1;
        }
    }
    t
}

/// Support of `K_{N1,N2}` on `window`: zero entries outside the
/// predicted box.
pub fn kernel_support_instance(
    n1: u64,
    n2: u64,
    window: Interval,
    cfg: &TransformConfig,
) -> Result<Tally> {
    let k = kernel(n1, n2, window, cfg)?;
    Ok(Tally {
        checked: k.values().len(),
        violations: k.support_violations(cfg.alpha(), support_constant(cfg.alpha())),
        extra: 0.0,
    })
}

/// Suite sizes at desk scale.
const SPARSE_M: u64 = 1 << 8;
const SPARSE_THETA: f64 = 0.5;
const REPORT_INSTANCES: usize = 8;

fn small_cfg(cfg: &ExperimentConfig) -> Result<TransformConfig> {
    TransformConfig::new(SPARSE_M, SPARSE_THETA, cfg.alpha, cfg.bump)
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

/// Runs every executable lemma on `cfg.instances` random instances drawn
/// from `cfg.seed`, on a pool of `cfg.workers` threads.
pub fn lemma_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    pool.install(|| suite_body(cfg))
}

fn suite_body(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let n = cfg.instances;
    let seed = cfg.seed;
    let small = small_cfg(cfg)?;
    let mut lines = Vec::new();
    let mut tables = Vec::new();

    let t = run_instances(seed, 1, n, |rng| {
        let span = 1u64 << 14;
        let f = random_function(rng, 512, 0, span);
        let lam = random_lambda(rng, &f, span);
        key_cz_instance(&f, lam)
    })?;
    lines.push(fold("key-cz", true, &t, "N=2^0..2^13 A=2^0..2^8".into()));

    let t = run_instances(seed, 2, n, |rng| {
        let lambda0 = 1.0;
        let scales = small.scales().len();
        let betas: Vec<f64> = (0..scales).map(|_| rng.random::<f64>() * lambda0).collect();
        let goods: Vec<LatticeFunction> = (0..scales)
            .map(|_| {
                let spikes = rng.random_range(0..4);
                LatticeFunction::from_pairs(
                    (0..spikes).map(|_| (rng.random_range(-64..64), log_uniform(rng, 1e-1, 1e3))),
                )
            })
            .collect();
        sparse_max_instance(&goods, &betas, lambda0, &small)
    })?;
    let fired: f64 = t.iter().map(|x| x.extra).sum();
    lines.push(fold(
        "sparse-max",
        true,
        &t,
        format!("M={SPARSE_M} theta={SPARSE_THETA} fired={fired}"),
    ));

    let t = run_instances(seed, 3, n, |rng| {
        let d = rng.random_range(1..=1024usize);
        let heavy = rng.random_bool(0.5);
        let a: Vec<f64> = (0..d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                if heavy {
                    g / rng.random::<f64>().max(1e-3)
                } else {
                    g
                }
            })
            .collect();
        Ok(menshov_instance(&a))
    })?;
    let worst = t.iter().map(|x| x.extra).fold(0.0, f64::max);
    lines.push(fold(
        "menshov",
        true,
        &t,
        format!("D=1..1024 max_lhs_over_rhs={}", sci(worst)),
    ));

    let purge = (SPARSE_M as f64).powf(SPARSE_THETA - 2.0 * cfg.epsilon);
    let t = run_instances(seed, 4, n, |rng| {
        let span = 1u64 << 10;
        let f = random_function(rng, 256, -512, span);
        let lam = random_lambda(rng, &f, span);
        four_term_instance(&f, lam, purge, &small)
    })?;
    let worst = t.iter().map(|x| x.extra).fold(0.0, f64::max);
    lines.push(fold(
        "four-term",
        true,
        &t,
        format!("max_relative_error={}", sci(worst)),
    ));

    // The field-based checks share their instances.
    let field_instance = |rng: &mut ChaCha8Rng| -> Result<(FieldFamilies, f64, IntervalFamily)> {
        let span = 1u64 << 9;
        let f = random_function(rng, 64, -256, span);
        let lam = random_lambda(rng, &f, span);
        let fam = field_families(&f, lam, &small)?;
        let hull = fam
            .by_a
            .iter()
            .map(|r| &r.1)
            .chain(fam.by_s.iter().map(|r| &r.1))
            .filter_map(|fields| hull_of(fields))
            .reduce(|a, b| a.hull(&b));
        let scale = rng.random_range(2..=6u32);
        let windows = hull.map_or_else(IntervalFamily::empty, |h| IntervalFamily::grid(scale, h));
        Ok((fam, lam, windows))
    };
    let tallies = run_instances(seed, 5, n, |rng| {
        let (fam, lam, windows) = field_instance(rng)?;
        let mut beta = Tally::default();
        for fields in fam
            .by_a
            .iter()
            .map(|r| &r.1)
            .chain(fam.by_s.iter().map(|r| &r.1))
        {
            let t = beta_constancy_instance(fields, &windows);
            beta.checked += t.checked;
            beta.violations += t.violations;
        }
        let rows_a: Vec<(u64, Vec<Vec<f64>>)> = fam
            .by_a
            .iter()
            .map(|(a, f)| (*a, beta_table(f, &windows)))
            .collect();
        let rows_s: Vec<(u32, Vec<Vec<f64>>)> = fam
            .by_s
            .iter()
            .map(|(s, f)| (*s, beta_table(f, &windows)))
            .collect();
        let exc = exceptional_instance(&rows_a, &rows_s, lam, cfg.epsilon, &windows);
        Ok([beta, exc])
    })?;
    let beta: Vec<Tally> = tallies.iter().map(|p| p[0]).collect();
    let exc: Vec<Tally> = tallies.iter().map(|p| p[1]).collect();
    lines.push(fold("beta-constancy", true, &beta, "exact equality".into()));
    lines.push(fold(
        "exceptional-whole-J",
        true,
        &exc,
        "membership, measure, Chebyshev bound".into(),
    ));

    let cells: Vec<(u64, u64)> = dyadic_range(4, 7)
        .into_iter()
        .flat_map(|a| dyadic_range(4, 7).into_iter().map(move |b| (a, b)))
        .collect();
    let t = run_instances(seed, 7, n.min(4 * cells.len()), |rng| {
        let (n1, n2) = cells[rng.random_range(0..cells.len())];
        let len = rng.random_range(1..=n1.min(n2));
        let start = rng.random_range(-256..256);
        kernel_support_instance(n1, n2, Interval::new(start, start + len as i64)?, &small)
    })?;
    lines.push(fold("kernel-support", true, &t, "N=2^4..2^7".into()));

    // Report-only probes.
    let probe_cfg = TransformConfig::new(1 << 9, 0.4, cfg.alpha, cfg.bump)?;
    let probe_cells: Vec<ProbeCell> = dyadic_range(4, 8)
        .into_iter()
        .flat_map(|a| dyadic_range(4, 8).into_iter().map(move |b| (a, b)))
        .map(|(n1, n2)| {
            let len = n1.min(n2) / 2;
            ProbeCell {
                n1,
                n2,
                window: Interval::new(0, len as i64).expect("nonempty"),
            }
        })
        .collect();
    let rows = probe_grid(&probe_cells, &probe_cfg, cfg.epsilon)?;
    let mut table = String::from("# kernel probe: N1 N2 J_len C_hat delta_hat\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{} {} {} {} {}",
            r.n1,
            r.n2,
            r.j_len,
            sci(r.c_hat),
            sci(r.delta_hat)
        );
    }
    let c_max = rows.iter().map(|r| r.c_hat).fold(0.0, f64::max);
    let c_min = rows.iter().map(|r| r.c_hat).fold(f64::INFINITY, f64::min);
    let d_min = rows
        .iter()
        .map(|r| r.delta_hat)
        .fold(f64::INFINITY, f64::min);
    let mut diag_max: f64 = 0.0;
    for n in dyadic_range(4, 8) {
        let k = kernel(n, n, Interval::new(0, (n / 2) as i64)?, &probe_cfg)?;
        let split = split_diagonal(&k, band_width(n, cfg.epsilon))?;
        diag_max = diag_max
            .max(split.diag_constant(cfg.alpha))
            .max(split.err_constant(cfg.alpha));
    }
    tables.push(table);
    lines.push(SuiteLine {
        lemma: "kernel-constants".into(),
        asserted: false,
        instances: rows.len(),
        checked: rows.len(),
        violations: 0,
        detail: format!(
            "C_hat=[{}, {}] delta_hat_min={} diag_max={}",
            sci(c_min),
            sci(c_max),
            sci(d_min),
            sci(diag_max)
        ),
    });

    let mut table = String::from("# autocorrelation: N N^alpha*sup_{x!=0}|mu_N*reflect(mu_N)|\n");
    let mut vals = Vec::new();
    for n in dyadic_range(5, 10) {
        let v = autocorrelation_offdiag_sup(n, cfg.alpha, cfg.bump)?;
        let _ = writeln!(table, "{n} {}", sci(v));
        vals.push(v);
    }
    tables.push(table);
    let (lo, hi) = spread(&vals);
    lines.push(SuiteLine {
        lemma: "autocorrelation".into(),
        asserted: false,
        instances: vals.len(),
        checked: vals.len(),
        violations: 0,
        detail: format!("min={} max={}", sci(lo), sci(hi)),
    });

    let t = run_instances(seed, 8, n.min(REPORT_INSTANCES), |rng| {
        let span = 1u64 << 9;
        let f = random_function(rng, 64, -256, span);
        let lam = random_lambda(rng, &f, span);
        let dec = cz_decompose(&f, lam)?;
        let goods = small
            .scales()
            .iter()
            .map(|&n| good_summed(&f, &dec, 1, n, BadFamily::D1, lam, small.alpha()))
            .collect::<Result<Vec<_>>>()?;
        let fields = averaged_fields(&goods, dec.cubes(), &small)?;
        let windows =
            hull_of(&fields).map_or_else(IntervalFamily::empty, |h| IntervalFamily::grid(5, h));
        let rep = check_bad_form(&goods, dec.cubes(), &windows, lam / 64.0, &small)?;
        Ok(Tally {
            checked: rep.sites_checked,
            violations: rep.neither,
            extra: rep.hypothesis_fired as f64,
        })
    })?;
    let fired: f64 = t.iter().map(|x| x.extra).sum();
    lines.push(fold(
        "bad-form",
        false,
        &t,
        format!("fired={fired} violations=neither-branch sites"),
    ));

    let consts = ProbeConstants {
        size: c_max,
        delta: d_min.min(1.0),
        diag: diag_max,
        band_exponent: cfg.epsilon,
    };
    let t = run_instances(seed, 9, n.min(REPORT_INSTANCES), |rng| {
        let start = rng.random_range(-64..64i64);
        let window = Interval::new(start, start + 32)?;
        let mut bad = Vec::new();
        for &n in small.scales() {
            for s in 0..2u32 {
                let block = block_for(n, small.alpha(), start);
                let iv = block.interval();
                let sites = rng.random_range(1..=8);
                let b = LatticeFunction::from_pairs((0..sites).map(|_| {
                    let x = rng.random_range(iv.start()..iv.end());
                    let v: f64 = StandardNormal.sample(rng);
                    (x, v)
                }));
                bad.push(BadTerm { n, s, b });
            }
        }
        let mut stops = vec![0u64];
        stops.extend(
            small
                .scales()
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.5)),
        );
        if stops.last() != small.scales().last() {
            stops.push(small.m());
        }
        let sides = square_function_sides(window, &bad, &stops, &small, &consts)?;
        Ok(Tally {
            checked: 1,
            violations: 0,
            extra: sides.ratio(),
        })
    })?;
    let worst = t.iter().map(|x| x.extra).fold(0.0, f64::max);
    lines.push(fold(
        "square-function",
        false,
        &t,
        format!("max_ratio={}", sci(worst)),
    ));

    Ok(SuiteReport {
        header: cfg.describe(),
        lines,
        tables,
    })
}

fn spread(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}
