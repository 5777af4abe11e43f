//! `twinbeam`: spectral overlap, Schmidt analysis, visibility curves, Monte
//! Carlo count records and visibility fits for PDC twin beams.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration or I/O, 3 numerical or
//! resolution failure (including a failed `report`), 4 non-convergence.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use twinbeam_core::config::{Approximation, Config, ModelKind, Strategy};
use twinbeam_core::Error;

use commands::FilterPreset;

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;

#[derive(Parser)]
#[command(name = "twinbeam", version, about = "Twin-beam PDC spectral and photon-statistics toolkit")]
struct Cli {
    /// TOML configuration; the bundled reference waveguide when omitted.
    #[arg(long, global = true, env = "TWINBEAM_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads for grid and Monte Carlo work.
    #[arg(long, global = true, env = "TWINBEAM_THREADS")]
    threads: Option<usize>,

    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproxArg {
    Gaussian,
    Sinc,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    PerMode,
    ThermalMixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Approx,
    Full,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long, value_enum, default_value_t = FilterPreset::Custom)]
    filter: FilterPreset,

    /// Grid points per axis.
    #[arg(long)]
    grid: Option<usize>,

    /// Phase-matching function form.
    #[arg(long, value_enum)]
    approx: Option<ApproxArg>,
}

impl SpectralArgs {
    fn apply(&self, cfg: &mut Config) {
        self.filter.apply(cfg);
        if let Some(n) = self.grid {
            cfg.grid.points = n;
        }
        if let Some(a) = self.approx {
            cfg.grid.approx = match a {
                ApproxArg::Gaussian => Approximation::Gaussian,
                ApproxArg::Sinc => Approximation::Sinc,
            };
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the joint spectral amplitude; write marginals and the anti-diagonal cut.
    Jsa {
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Also write the full complex grid.
        #[arg(long)]
        dump: bool,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Spectral overlap between signal and idler.
    Overlap {
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Also maximize |O| over a signal delay.
        #[arg(long)]
        compensate_delay: bool,
    },
    /// Schmidt decomposition; write the coefficient spectrum and leading modes.
    Schmidt {
        #[command(flatten)]
        spectral: SpectralArgs,
        /// Number of leading mode pairs to export.
        #[arg(long, default_value_t = 0)]
        modes: usize,
        /// Discarded squared Schmidt weight.
        #[arg(long)]
        residual: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Visibility against mean photon number for a given overlap.
    Visibility {
        #[arg(long)]
        overlap: f64,
        /// `start:stop:count` or a comma-separated list.
        #[arg(long, default_value = "0:0.5:11")]
        mean_n: String,
        #[arg(long)]
        eta1: Option<f64>,
        #[arg(long)]
        eta2: Option<f64>,
        /// CSV destination; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Simulate gated threshold detection; a sweep when powers are given.
    Montecarlo {
        #[command(flatten)]
        spectral: SpectralArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gates: Option<u64>,
        #[arg(long)]
        mean_n: Option<f64>,
        #[arg(long)]
        eta1: Option<f64>,
        #[arg(long)]
        eta2: Option<f64>,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Comma-separated pump powers for an efficiency sweep.
        #[arg(long, value_delimiter = ',')]
        powers: Option<Vec<f64>>,
        /// Count-record CSV destination.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Fit the spectral overlap to measured visibilities.
    Fit {
        /// CSV with columns mean_n, V, sigma_V.
        input: PathBuf,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        /// Fixed eta1/eta2 for the full model; fitted when omitted.
        #[arg(long)]
        eta_ratio: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance criteria against the configuration.
    Report {
        #[arg(long, default_value_t = twinbeam_core::validation::ACCEPTANCE_SEED)]
        seed: u64,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Io(_) | Error::Csv(_) | Error::Format(_) => EXIT_CONFIG,
        Error::NonConvergence { .. } => EXIT_CONVERGENCE,
        _ => EXIT_NUMERIC,
    }
}

fn parse_sweep(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("invalid mean-n sweep '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (a, b) = (num(start)?, num(stop)?);
            let n: usize = count.trim().parse().map_err(|_| bad())?;
            match n {
                0 => Err(bad()),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
            }
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, Failure> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::reference()),
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    let mut cfg = load_config(cli.config.as_ref())?;
    let outcome = match cli.command {
        Command::Jsa { spectral, dump, out_dir } => {
            spectral.apply(&mut cfg);
            commands::jsa(&cfg, &out_dir, dump)?
        }
        Command::Overlap { spectral, compensate_delay } => {
            spectral.apply(&mut cfg);
            commands::overlap(&cfg, compensate_delay)?
        }
        Command::Schmidt { spectral, modes, residual, out_dir } => {
            spectral.apply(&mut cfg);
            commands::schmidt(&cfg, &out_dir, modes, residual)?
        }
        Command::Visibility { overlap, mean_n, eta1, eta2, output } => {
            let mean_ns = parse_sweep(&mean_n)?;
            cfg.detection.eta1 = eta1.unwrap_or(cfg.detection.eta1);
            cfg.detection.eta2 = eta2.unwrap_or(cfg.detection.eta2);
            commands::visibility(&cfg, overlap, &mean_ns, output.as_deref())?
        }
        Command::Montecarlo { spectral, seed, gates, mean_n, eta1, eta2, strategy, powers, output } => {
            spectral.apply(&mut cfg);
            let sim = &mut cfg.sim;
            sim.seed = seed.unwrap_or(sim.seed);
            sim.gates = gates.unwrap_or(sim.gates);
            if let Some(n) = mean_n {
                sim.mean_n = n;
                sim.gain = None;
            }
            if let Some(s) = strategy {
                sim.strategy = match s {
                    StrategyArg::Auto => Strategy::Auto,
                    StrategyArg::PerMode => Strategy::PerMode,
                    StrategyArg::ThermalMixture => Strategy::ThermalMixture,
                };
            }
            if let Some(p) = powers {
                sim.powers = p;
            }
            cfg.detection.eta1 = eta1.unwrap_or(cfg.detection.eta1);
            cfg.detection.eta2 = eta2.unwrap_or(cfg.detection.eta2);
            commands::montecarlo(&cfg, output.as_deref())?
        }
        Command::Fit { input, model, eta_ratio, output } => {
            if let Some(m) = model {
                cfg.fit.model = match m {
                    ModelArg::Approx => ModelKind::Approx,
                    ModelArg::Full => ModelKind::Full,
                };
            }
            if eta_ratio.is_some() {
                cfg.fit.eta_ratio = eta_ratio;
            }
            commands::fit(&cfg, &input, output.as_ref())?
        }
        Command::Report { seed } => commands::report(&cfg, seed)?,
    };
    output::publish(&outcome.artifacts)?;
    print!("{}", outcome.stdout);
    Ok(!outcome.failed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERIC),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if let Error::NonConvergence { trace, .. } = &e {
                for line in trace {
                    eprintln!("  {line}");
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
