//! The command-line surface: configuration, input generators, the weak-type
//! sweep, the lemma suite and report emission.
//!
//! Settings are resolved as defaults, then `--config` (flat `key=value`
//! text), then explicit flags.

pub mod config;
pub mod generate;
pub mod suite;
pub mod sweep;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::czdecomp::cz_decompose;
use crate::error::{invalid, Result};
use crate::kernels::{probe_grid, ProbeCell};
use crate::lattice::io::{read_function, to_text};
use crate::lattice::{Interval, LatticeFunction};
use crate::numeric::dyadic_range;
use crate::operators::{h_max, transform, WeakProfile};

pub use config::ExperimentConfig;
pub use generate::{generate_input, Family, InputShape};

#[derive(Parser, Debug)]
#[command(
    name = "rough-ht",
    version,
    about = "Discrete rough Hilbert transform experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Comma-separated dyadic values of M.
    #[arg(long = "M", global = true, value_delimiter = ',')]
    pub m: Option<Vec<u64>>,
    /// Comma-separated thresholds (weak11, czd).
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Comma-separated input families.
    #[arg(long, global = true, value_delimiter = ',')]
    pub family: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of seeds per sweep cell.
    #[arg(long, global = true)]
    pub seeds: Option<u64>,
    /// Random instances per lemma.
    #[arg(long, global = true)]
    pub instances: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Flat `key=value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Permit alpha above the default cap.
    #[arg(long, global = true)]
    pub allow_alpha: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply H_M (or H_M^* with --max) to an input and print `site value` lines.
    Transform {
        /// `site value` text file; the first configured family is used otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        max: bool,
    },
    /// Calderon-Zygmund cubes `scale index average` of an input at --lambda.
    Czd {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Kernel size and regularity constants on a dyadic (N1, N2) grid.
    KernelProbe {
        #[arg(long, default_value_t = 4)]
        log2_min: u32,
        #[arg(long, default_value_t = 9)]
        log2_max: u32,
    },
    /// Weak-type ratios of H_M^* per M and threshold.
    Weak11 {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Randomized checks of the executable lemmas.
    LemmaSuite,
    /// The full weak-type sweep with per-term magnitudes.
    Sweep,
}

impl GlobalArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = &self.m {
            cfg.m_list = v.clone();
        }
        if let Some(v) = &self.family {
            cfg.families = v.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.instances {
            cfg.instances = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        cfg.allow_alpha |= self.allow_alpha;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_input(path: Option<&Path>, cfg: &ExperimentConfig, m: u64) -> Result<LatticeFunction> {
    match path {
        Some(p) => read_function(std::io::BufReader::new(std::fs::File::open(p)?)),
        None => {
            let tcfg = cfg.transform_config(m)?;
            let shape = InputShape {
                m,
                alpha: cfg.alpha,
                n_min: tcfg.n_min(),
            };
            generate_input(&cfg.families[0], &shape, cfg.seed)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct Weak11Row {
    #[serde(rename = "M")]
    m: u64,
    theta: f64,
    alpha: f64,
    lambda: f64,
    ratio: f64,
    runtime_ms: u128,
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            emit(out, &e.render().to_string())?;
            return Ok(code);
        }
    };
    let cfg = cli.global.resolve()?;
    let first_m = cfg.m_list[0];
    match &cli.command {
        Command::Transform { input, max } => {
            let tcfg = cfg.transform_config(first_m)?;
            let f = load_input(input.as_deref(), &cfg, first_m)?;
            let g = if *max {
                h_max(&f, &tcfg)?
            } else {
                transform(&f, &tcfg)?
            };
            emit(out, &to_text(&g))?;
        }
        Command::Czd { input } => {
            let f = load_input(input.as_deref(), &cfg, first_m)?;
            let lams = cli
                .global
                .lambda
                .clone()
                .ok_or_else(|| invalid("lambda", "czd needs --lambda"))?;
            for lam in lams {
                let dec = cz_decompose(&f, lam)?;
                emit(out, &format!("# lambda {lam}: {} cubes\n", dec.len()))?;
                let mut buf = Vec::new();
                dec.write_cubes(&mut buf)?;
                out.write_all(&buf)?;
            }
        }
        Command::KernelProbe { log2_min, log2_max } => {
            if log2_min > log2_max {
                return Err(invalid("log2_min", "exceeds log2_max"));
            }
            let ns = dyadic_range(*log2_min, *log2_max);
            let top = *ns.last().expect("nonempty range");
            let tcfg =
                crate::operators::TransformConfig::new(top.max(4), 0.01, cfg.alpha, cfg.bump)?;
            let mut cells = Vec::new();
            for &n1 in &ns {
                for &n2 in &ns {
                    let len = (n1.min(n2) / 2).max(1) as i64;
                    cells.push(ProbeCell {
                        n1,
                        n2,
                        window: Interval::new(0, len)?,
                    });
                }
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| invalid("workers", e.to_string()))?;
            let rows = pool.install(|| probe_grid(&cells, &tcfg, cfg.epsilon))?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("kernel_probe.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            emit(
                out,
                &format!("{} cells written to {}\n", rows.len(), path.display()),
            )?;
        }
        Command::Weak11 { input } => {
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("weak11.csv");
            let mut w = csv::Writer::from_path(&path)?;
            for &m in &cfg.m_list {
                let tcfg = cfg.transform_config(m)?;
                let f = load_input(input.as_deref(), &cfg, m)?;
                let start = Instant::now();
                let profile = WeakProfile::new(&h_max(&f, &tcfg)?, f.l1_norm())?;
                let lams = match &cli.global.lambda {
                    Some(l) => l.clone(),
                    None => {
                        let window = cfg.window(m);
                        cfg.lambda_grid(f.l1_norm() / window.len() as f64, 2.0 * f.sup_norm())
                    }
                };
                let runtime_ms = start.elapsed().as_millis();
                for lam in lams {
                    w.serialize(Weak11Row {
                        m,
                        theta: cfg.theta,
                        alpha: cfg.alpha,
                        lambda: lam,
                        ratio: profile.ratio(lam),
                        runtime_ms,
                    })?;
                }
            }
            w.flush()?;
            emit(out, &format!("written {}\n", path.display()))?;
        }
        Command::LemmaSuite => {
            let report = suite::lemma_suite(&cfg)?;
            report.write_all(&cfg.output_dir)?;
            emit(out, &report.to_text())?;
            if report.total_violations() > 0 {
                return Ok(1);
            }
        }
        Command::Sweep => {
            let report = sweep::weak11_sweep(&cfg)?;
            report.write_all(&cfg.output_dir)?;
            let summary = report.summary();
            for fam in &summary.families {
                emit(
                    out,
                    &format!(
                        "{}: ratio spread over M {:.4}, G_M spread {:.4}\n",
                        fam.family, fam.ratio_spread, fam.g_m_spread
                    ),
                )?;
            }
            if summary.failed_cells > 0 {
                emit(out, &format!("{} cells failed\n", summary.failed_cells))?;
            }
        }
    }
    Ok(0)
}
