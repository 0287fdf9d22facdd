//! `rabi`: command-line front end for the NCCM Rabi-model solver.

mod config;
mod error;
mod evolve;
mod fourier;
mod guard;
mod spectrum;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rabi_nccm::integrator::{evolve_with, IntegrationPlan};
use rabi_nccm::nccm::CriticalScan;
use rabi_nccm::observables::f_series;
use rabi_nccm::spectral::{Window, DEFAULT_PROMINENCE};
use rabi_nccm::{ClusterConfig, ClusterState, RabiParams};
use rayon::prelude::*;

use config::{default_out_dir, FileConfig, Output, Overrides};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "rabi", version, about = "NCCM time evolution of the Rabi Hamiltonian")]
struct Cli {
    /// output directory (default: $RABI_OUT_DIR, else the working directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve |0,↓⟩ and write coefficients, observables and a binary dump.
    Evolve(EvolveArgs),
    /// Regenerate one of the convergence / comparison tables.
    Table(TableArgs),
    /// Linear-response excitation spectrum along a coupling grid.
    Spectrum(SpectrumArgs),
    /// Breakdown coupling g_c for each truncation.
    Critical(CriticalArgs),
    /// Fourier spectrum and peaks of a sampled series.
    Fourier(FourierArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML file with the same keys as the flags (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// coupling(s), comma separated
    #[arg(long, value_delimiter = ',')]
    g: Vec<f64>,
    /// SUB-N truncation(s), paired with --g
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    /// RK4 step [default: 0.0005]
    #[arg(long)]
    dt: Option<f64>,
    /// end point in units of gt (ωt when g = 0)
    #[arg(long, conflicts_with = "t_end")]
    gt_end: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// keep every k-th step [default: 20]
    #[arg(long)]
    sample_every: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    omega0: Option<f64>,
    /// run even when g exceeds the stored breakdown coupling g_c(N)
    #[arg(long)]
    force: bool,
}

impl RunArgs {
    fn overrides(&self, outputs: Vec<Output>, out_dir: Option<PathBuf>) -> Overrides {
        Overrides {
            g: self.g.clone(),
            n: self.n.clone(),
            dt: self.dt,
            gt_end: self.gt_end,
            t_end: self.t_end,
            sample_every: self.sample_every,
            omega: self.omega,
            omega0: self.omega0,
            outputs,
            out_dir,
            force: self.force,
        }
    }

    fn resolve(&self, outputs: Vec<Output>, out_dir: Option<PathBuf>) -> CliResult<Vec<config::RunConfig>> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        config::resolve(file, self.overrides(outputs, out_dir))
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// products to write [default: all]
    #[arg(long, value_enum, value_delimiter = ',')]
    outputs: Vec<Output>,
}

#[derive(Args)]
struct TableArgs {
    /// 1: step-size study, 2: truncation study, 3: inversion vs CI
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    which: u8,
    /// diff against the published values
    #[arg(long)]
    check: bool,
    /// truncations left out of the check
    #[arg(long = "skip-n", value_delimiter = ',')]
    skip_n: Vec<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long = "N")]
    n: usize,
    /// explicit couplings, comma separated (overrides the grid)
    #[arg(long, value_delimiter = ',')]
    g: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    g_min: f64,
    #[arg(long, default_value_t = 1.0)]
    g_max: f64,
    #[arg(long, default_value_t = 0.01)]
    g_step: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
}

#[derive(Args)]
struct CriticalArgs {
    /// truncations, comma separated
    #[arg(long = "N", value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// upper end of the scan
    #[arg(long, default_value_t = 1.0)]
    g_max: f64,
    /// bisection width
    #[arg(long, default_value_t = 1e-4)]
    resolution: f64,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Rect,
    Hann,
}

#[derive(Args)]
struct FourierArgs {
    /// observables CSV from `evolve`; without it a run is made from the flags
    input: Option<PathBuf>,
    /// series to transform (`f` reads re_f/im_f)
    #[arg(long, default_value = "f")]
    column: String,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 3)]
    peaks: usize,
    #[arg(long, value_enum, default_value = "rect")]
    window: WindowArg,
    /// peak prominence as a fraction of the largest magnitude
    #[arg(long, default_value_t = DEFAULT_PROMINENCE)]
    prominence: f64,
    /// also write a peak vs exact-transition report
    #[arg(long)]
    ci_compare: bool,
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone().unwrap_or_else(default_out_dir)
}

fn cmd_evolve(args: EvolveArgs, out: Option<PathBuf>) -> CliResult<()> {
    let runs = args.run.resolve(args.outputs, out)?;
    let results: Vec<_> = runs.par_iter().map(evolve::run).collect();
    let mut first_err = None;
    for (cfg, r) in runs.iter().zip(results) {
        match r {
            Ok((summary, files)) => {
                println!("{}", evolve::describe(cfg, &summary));
                for f in files {
                    println!("  wrote {}", f.display());
                }
            }
            Err(e) => {
                if runs.len() > 1 {
                    eprintln!("g = {} SUB-{}: {e}", cfg.params.g, cfg.n);
                }
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn cmd_fourier(args: FourierArgs, out: Option<PathBuf>) -> CliResult<()> {
    let window = match args.window {
        WindowArg::Rect => Window::Rectangular,
        WindowArg::Hann => Window::Hann,
    };
    let (series, stem, params, out_dir) = match &args.input {
        Some(path) => {
            if args.column != "f" && args.ci_compare {
                eprintln!("note: the CI comparison refers to f(t) transitions");
            }
            let series = fourier::read_series(path, &args.column)?;
            let g = args.run.g.first().copied().or(series.g);
            let params = match g {
                Some(g) => Some(
                    RabiParams::new(args.run.omega.unwrap_or(1.0), args.run.omega0.unwrap_or(1.0), g)
                        .map_err(|e| CliError::Config(e.to_string()))?,
                ),
                None => None,
            };
            let stem = path.file_stem().map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned());
            (series, stem, params, out_dir(&out))
        }
        None => {
            if args.column != "f" {
                return Err(CliError::Config("--column needs an input file".into()));
            }
            let runs = args.run.resolve(vec![], out)?;
            let [cfg] = runs.as_slice() else {
                return Err(CliError::Config("fourier takes a single (g, N) pair".into()));
            };
            evolve::check_guard(cfg)?;
            let plan = IntegrationPlan::new(cfg.dt, 0.0, cfg.t_end(), cfg.sample_every)?;
            let (mut t, mut values) = (Vec::new(), Vec::new());
            evolve_with(&ClusterState::vacuum(cfg.n, 0.0), cfg.params, ClusterConfig::sub(cfg.n), &plan, |s| {
                t.push(s.t);
                values.push(f_series(s));
            })?;
            let series = fourier::Series { t, values, g: Some(cfg.params.g) };
            (series, cfg.stem(), Some(cfg.params), cfg.out_dir.clone())
        }
    };
    let compare = if args.ci_compare {
        Some(params.ok_or_else(|| CliError::Config("--ci-compare needs --g or a gt column".into()))?)
    } else {
        None
    };
    fourier::run(fourier::FourierJob {
        series,
        stem,
        window,
        peaks: args.peaks,
        prominence: args.prominence,
        compare,
        out_dir: &out_dir,
    })
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Evolve(a) => cmd_evolve(a, cli.out),
        Command::Table(a) => table::run(a.which, a.check, &a.skip_n, &out_dir(&cli.out)),
        Command::Spectrum(a) => {
            let base = RabiParams::new(a.omega, a.omega0, 0.0).map_err(|e| CliError::Config(e.to_string()))?;
            let gs = if a.g.is_empty() { spectrum::grid(a.g_min, a.g_max, a.g_step)? } else { a.g };
            spectrum::run_spectrum(a.n, base, &gs, &out_dir(&cli.out))
        }
        Command::Critical(a) => {
            let scan = CriticalScan { g_hi: a.g_max, resolution: a.resolution, ..CriticalScan::default() };
            if !(scan.resolution > 0.0) || !(scan.g_hi > scan.g_lo) {
                return Err(CliError::Config("need g_max > 0 and resolution > 0".into()));
            }
            spectrum::run_critical(&a.n, a.omega, a.omega0, scan, &out_dir(&cli.out))
        }
        Command::Fourier(a) => cmd_fourier(a, cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
