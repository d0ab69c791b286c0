use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::czdecomp::{cz_decompose, good_summed, purge_small_cubes, BadFamily};
use crate::error::{invalid, Error, Result};
use crate::lattice::{Interval, IntervalFamily, LatticeFunction};
use crate::numeric::dyadic_log2;
use crate::operators::{four_term_split, h_max, max_partial_sums, TransformConfig, WeakProfile};
use crate::stopping::{averaged_fields, error_function};

use super::config::ExperimentConfig;
use super::generate::{generate_input, normalize_l1, Family, InputShape};

/// Per-threshold outputs of the decomposition pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineTerms {
    /// `lam |{T > lam/4}| / ||f_0||_1` for the four maximal terms.
    pub terms: [f64; 4],
    pub g_m_ratio: f64,
    /// `||f_0||_1` after the small-cube purge.
    pub purged_l1: f64,
    /// Largest site-wise error of the four-term reconstruction of the
    /// purged function.
    pub reconstruction_error: f64,
    /// `sup |purged f_0|`, the scale of `reconstruction_error`.
    pub purged_sup: f64,
}

fn weak_term(t: &LatticeFunction, lam: f64, norm: f64) -> f64 {
    let count = t.values().iter().filter(|v| v.abs() > lam / 4.0).count();
    lam * count as f64 / norm
}

/// Runs CZ, purge and the four-term split at `lam` on the positive and
/// negative parts of `f0` separately, then evaluates the four maximal
/// terms and `G_M` on the recombined per-scale inputs.
pub fn pipeline_terms(
    f0: &LatticeFunction,
    cfg: &TransformConfig,
    lam: f64,
    purge: f64,
) -> Result<PipelineTerms> {
    let norm = f0.l1_norm();
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let scales = cfg.scales().len();
    let mut high = vec![LatticeFunction::zero(); scales];
    let mut high_mean = vec![LatticeFunction::zero(); scales];
    let mut low = vec![LatticeFunction::zero(); scales];
    let mut mean = LatticeFunction::zero();
    let mut g_m = LatticeFunction::zero();
    let mut purged_all = LatticeFunction::zero();
    let mut recon: f64 = 0.0;
    for (sign, part) in [(1.0, f0.positive_part()), (-1.0, f0.negative_part())] {
        if part.is_empty() {
            continue;
        }
        let dec = cz_decompose(&part, lam)?;
        let purged = purge_small_cubes(&part, &dec, purge);
        let split = four_term_split(&purged, cfg, lam, dec.cubes())?;
        recon = recon.max(split.reconstruction_error(&purged));
        let add = |acc: &mut LatticeFunction, f: &LatticeFunction| *acc = &*acc + &f.scale(sign);
        for (i, t) in split.scales.iter().enumerate() {
            add(&mut high[i], &t.high);
            add(&mut high_mean[i], &t.high_mean);
            add(&mut low[i], &t.low_oscillation);
        }
        add(&mut mean, &split.mean);
        add(&mut g_m, &split.g_m);
        add(&mut purged_all, &purged);
    }
    let terms = [
        weak_term(&max_partial_sums(&high, cfg, true)?, lam, norm),
        weak_term(&max_partial_sums(&high_mean, cfg, true)?, lam, norm),
        weak_term(&max_partial_sums(&low, cfg, true)?, lam, norm),
        weak_term(&h_max(&mean, cfg)?, lam, norm),
    ];
    let e = g_m.l2_norm();
    Ok(PipelineTerms {
        terms,
        g_m_ratio: e * e / (lam * norm),
        purged_l1: purged_all.l1_norm(),
        reconstruction_error: recon,
        purged_sup: purged_all.sup_norm(),
    })
}

/// `sum_{A, i} ||ER_{A,i}||_1 / ||f_0||_1` at `lam` for a nonnegative `f0`,
/// with windows `J` of length `j_len` and the small-cube purge applied.
pub fn error_ratio(
    f0: &LatticeFunction,
    cfg: &TransformConfig,
    lam: f64,
    j_len: u64,
    purge: f64,
) -> Result<f64> {
    let norm = f0.l1_norm();
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let j_scale = dyadic_log2(j_len)?;
    let dec = cz_decompose(f0, lam)?;
    let purged = purge_small_cubes(f0, &dec, purge);
    let last_a = purged.band_count(lam * cfg.m() as f64);
    let mut total = 0.0;
    let mut a = 1u64;
    while a <= last_a {
        for family in [BadFamily::D1, BadFamily::D2] {
            let goods = cfg
                .scales()
                .iter()
                .map(|&n| good_summed(&purged, &dec, a, n, family, lam, cfg.alpha()))
                .collect::<Result<Vec<_>>>()?;
            if goods.iter().all(LatticeFunction::is_empty) {
                continue;
            }
            let fields = averaged_fields(&goods, dec.cubes(), cfg)?;
            let Some(hull) = fields
                .iter()
                .filter_map(LatticeFunction::support_hull)
                .reduce(|a, b| a.hull(&b))
            else {
                continue;
            };
            let windows = IntervalFamily::grid(j_scale, hull);
            total += error_function(&fields, &windows).l1_norm();
        }
        a *= 2;
    }
    Ok(total / norm)
}

/// Fails when an output of `f` under `cfg` could leave `window`.
pub fn check_window(f: &LatticeFunction, cfg: &TransformConfig, window: &Interval) -> Result<()> {
    let Some(hull) = f.support_hull() else {
        return Ok(());
    };
    let reach = (2.0 * cfg.m() as f64).powf(cfg.alpha()).ceil() as i64 + 1;
    if hull.start() - reach < window.start() || hull.end() + reach > window.end() {
        return Err(invalid(
            "window",
            format!("support {hull} plus reach {reach} leaves {window}"),
        ));
    }
    Ok(())
}

/// One CSV row: a threshold of one `(M, family, seed)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub m: u64,
    pub family: String,
    pub seed: u64,
    pub lambda_index: usize,
    pub lambda: Option<f64>,
    pub ratio: Option<f64>,
    pub term_i: Option<f64>,
    pub term_ii: Option<f64>,
    pub term_iii: Option<f64>,
    pub term_iv: Option<f64>,
    pub g_m_ratio: Option<f64>,
    pub purged_l1: Option<f64>,
    pub reconstruction_error: Option<f64>,
    pub status: String,
}

impl SweepRow {
    fn marker(m: u64, family: &Family, seed: u64, status: String) -> Self {
        Self {
            m,
            family: family.name(),
            seed,
            lambda_index: 0,
            lambda: None,
            ratio: None,
            term_i: None,
            term_ii: None,
            term_iii: None,
            term_iv: None,
            g_m_ratio: None,
            purged_l1: None,
            reconstruction_error: None,
            status,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellTiming {
    #[serde(rename = "M")]
    pub m: u64,
    pub family: String,
    pub seed: u64,
    pub runtime_ms: u128,
}

/// All rows of a sweep in canonical order, plus wall-clock timings kept
/// apart so that the row file is reproducible.
#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub header: String,
    pub rows: Vec<SweepRow>,
    pub timings: Vec<CellTiming>,
}

/// Rows of one cell. A zero input gives a single `degenerate` row.
pub fn weak11_cell(
    cfg: &ExperimentConfig,
    tcfg: &TransformConfig,
    family: &Family,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let m = tcfg.m();
    let shape = InputShape {
        m,
        alpha: cfg.alpha,
        n_min: tcfg.n_min(),
    };
    let raw = generate_input(family, &shape, seed)?;
    let f0 = match normalize_l1(&raw) {
        Ok(f) => f,
        Err(Error::ZeroFunction) => {
            return Ok(vec![SweepRow::marker(m, family, seed, "degenerate".into())])
        }
        Err(e) => return Err(e),
    };
    let window = cfg.window(m);
    check_window(&f0, tcfg, &window)?;
    let norm = f0.l1_norm();
    let profile = WeakProfile::new(&h_max(&f0, tcfg)?, norm)?;
    let grid = cfg.lambda_grid(norm / window.len() as f64, 2.0 * f0.sup_norm());
    let purge = cfg.purge_threshold(m);
    let mut rows = Vec::with_capacity(grid.len());
    for (k, &lam) in grid.iter().enumerate() {
        let mut row = SweepRow {
            lambda_index: k,
            lambda: Some(lam),
            ratio: Some(profile.ratio(lam)),
            status: "ok".into(),
            ..SweepRow::marker(m, family, seed, String::new())
        };
        if k % cfg.term_stride == 0 {
            let p = pipeline_terms(&f0, tcfg, lam, purge)?;
            row.term_i = Some(p.terms[0]);
            row.term_ii = Some(p.terms[1]);
            row.term_iii = Some(p.terms[2]);
            row.term_iv = Some(p.terms[3]);
            row.g_m_ratio = Some(p.g_m_ratio);
            row.purged_l1 = Some(p.purged_l1);
            row.reconstruction_error = Some(p.reconstruction_error);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Sweeps every `(M, family, seed)` cell on a pool of `cfg.workers`
/// threads. A failing cell contributes one row carrying the error.
pub fn weak11_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let tcfgs = cfg
        .m_list
        .iter()
        .map(|&m| cfg.transform_config(m))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for tcfg in &tcfgs {
        for family in &cfg.families {
            for seed in cfg.seed..cfg.seed + cfg.seeds {
                cells.push((tcfg, family, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let results: Vec<(Vec<SweepRow>, CellTiming)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(tcfg, family, seed)| {
                let start = Instant::now();
                let rows = weak11_cell(cfg, tcfg, family, seed).unwrap_or_else(|e| {
                    vec![SweepRow::marker(
                        tcfg.m(),
                        family,
                        seed,
                        format!("error: {e}"),
                    )]
                });
                let timing = CellTiming {
                    m: tcfg.m(),
                    family: family.name(),
                    seed,
                    runtime_ms: start.elapsed().as_millis(),
                };
                (rows, timing)
            })
            .collect()
    });
    let mut report = SweepReport {
        header: cfg.describe(),
        ..Default::default()
    };
    for (rows, timing) in results {
        report.rows.extend(rows);
        report.timings.push(timing);
    }
    report.rows.sort_by(|a, b| {
        (a.m, &a.family, a.seed, a.lambda_index).cmp(&(b.m, &b.family, b.seed, b.lambda_index))
    });
    Ok(report)
}

/// Per-`M` maxima for one family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleSummary {
    #[serde(rename = "M")]
    pub m: u64,
    pub max_ratio: f64,
    pub max_g_m_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilySummary {
    pub family: String,
    pub per_m: Vec<ScaleSummary>,
    /// `max / min` over `M` of `max_ratio`.
    pub ratio_spread: f64,
    pub g_m_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub config: String,
    pub note: String,
    pub families: Vec<FamilySummary>,
    pub failed_cells: usize,
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else if max > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

pub const THETA_NOTE: &str =
    "theta defaults to 0.8 so that every M of the sweep has several active scales; \
the hypothesis 1 - epsilon < theta < 1 is not imposed";

impl SweepReport {
    pub fn summary(&self) -> SweepSummary {
        let mut by_family: BTreeMap<&str, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
        let mut failed = 0;
        for r in &self.rows {
            if r.status.starts_with("error") {
                failed += 1;
                continue;
            }
            let e = by_family
                .entry(&r.family)
                .or_default()
                .entry(r.m)
                .or_insert((0.0, 0.0));
            e.0 = e.0.max(r.ratio.unwrap_or(0.0));
            e.1 = e.1.max(r.g_m_ratio.unwrap_or(0.0));
        }
        let families = by_family
            .into_iter()
            .map(|(family, per)| {
                let per_m: Vec<ScaleSummary> = per
                    .into_iter()
                    .map(|(m, (r, g))| ScaleSummary {
                        m,
                        max_ratio: r,
                        max_g_m_ratio: g,
                    })
                    .collect();
                FamilySummary {
                    family: family.to_string(),
                    ratio_spread: spread(per_m.iter().map(|s| s.max_ratio)),
                    g_m_spread: spread(per_m.iter().map(|s| s.max_g_m_ratio)),
                    per_m,
                }
            })
            .collect();
        SweepSummary {
            config: self.header.clone(),
            note: THETA_NOTE.to_string(),
            families,
            failed_cells: failed,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in &self.timings {
            w.serialize(t)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Gnuplot blocks `M max_ratio max_g_m_ratio`, one per family.
    pub fn write_dat<W: Write>(&self, mut out: W) -> Result<()> {
        for fam in self.summary().families {
            writeln!(out, "# family {}", fam.family)?;
            writeln!(out, "# M max_ratio max_g_m_ratio")?;
            for s in &fam.per_m {
                writeln!(out, "{} {} {}", s.m, s.max_ratio, s.max_g_m_ratio)?;
            }
            writeln!(out)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// `sweep.csv`, `sweep_timing.csv`, `sweep_summary.json`, `sweep.dat`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("sweep.csv"))?)?;
        self.write_timings(std::fs::File::create(dir.join("sweep_timing.csv"))?)?;
        let json = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(dir.join("sweep_summary.json"), json + "\n")?;
        self.write_dat(std::fs::File::create(dir.join("sweep.dat"))?)?;
        Ok(())
    }
}
