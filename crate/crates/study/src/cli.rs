//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use aeul_core::bounds::{bound_table, write_bound_csv, BoundParams, ModulusEstimate};
use aeul_core::checkpoint;
use aeul_core::initial_data::approximating_family;
use aeul_core::solver::{run_model, CheckpointPolicy, Model, SolverConfig};
use aeul_core::{dealias, AlphaParam};
use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{Result, StudyError};
use crate::flows::{flow_study, persist_flows};
use crate::output::{merge_reports, persist_sweep};
use crate::sweep::{compute_sweep, workers_from_env};

#[derive(Debug, Parser)]
#[command(name = "aeul", version, about = "Pseudo-spectral alpha-Euler / Euler convergence lab on the 2pi-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single run with conserved-quantity monitors.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the first alpha of the config; 0 runs Euler.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Alpha-sweep against the Euler reference.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; defaults to AEUL_WORKERS or the core count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Particle flows of one alpha against Euler.
    Flows {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulates the rate bounds.
    Bounds(BoundsArgs),
    /// Merges sweep tables and emits a plot script.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma0: f64,
    /// `‖ω₀‖_{L∞}`.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.0625,0.015625,0.00390625,0.0009765625")]
    alphas: Vec<f64>,
    /// Defaults to the horizon alone.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Besov exponent of the vorticity modulus.
    #[arg(long, default_value_t = 1.0)]
    s: f64,
    /// Writes to standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn simulate(config: PathBuf, alpha: Option<f64>, output: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
    let alpha = alpha.unwrap_or(cfg.alphas[0]);
    let a = AlphaParam::new(alpha)?;
    let (omega0, _) = cfg.datum_pair()?;
    let omega0 = dealias(&omega0);
    let (q0, model) = if a.is_euler() {
        (omega0, Model::Euler)
    } else {
        (approximating_family(&omega0, a, cfg.family)?, Model::Alpha(a))
    };
    fs::create_dir_all(&dir)?;
    let scfg = SolverConfig {
        cfl: cfg.cfl,
        t_end: cfg.t_end,
        dealias: true,
        monitor_every: cfg.monitor_every,
        sample_interval: Some(cfg.sample_interval),
        record_velocity: false,
        checkpoint: cfg.checkpoint_every.map(|every| CheckpointPolicy {
            dir: dir.join("checkpoints"),
            every,
        }),
    };
    let out = run_model(&q0, model, &scfg)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("monitors.csv"))?);
    out.log.write_csv(&mut w)?;
    w.flush()?;
    checkpoint::write_file(&dir.join("final.aeul"), &out.final_state)?;
    Ok(())
}

fn sweep(config: PathBuf, output: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(o) = output {
        cfg.output_dir = o;
    }
    let workers = match workers {
        Some(0) => return Err(StudyError::config("--workers must be positive")),
        Some(w) => w,
        None => workers_from_env()?,
    };
    let report = compute_sweep(&cfg, workers)?;
    persist_sweep(&report, &cfg.output_dir)?;
    for f in &report.failures {
        eprintln!("alpha = {} failed: {}", f.alpha, f.message);
    }
    Ok(())
}

fn flows(config: PathBuf, alpha: Option<f64>, output: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let dir = output.unwrap_or_else(|| cfg.output_dir.clone());
    let (study, pa, pe) = flow_study(&cfg, alpha.unwrap_or(cfg.alphas[0]))?;
    persist_flows(&study, &pa, &pe, &dir)
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let params = BoundParams {
        c1: args.c1,
        c2: args.c2,
        c: args.c,
        m: args.m,
        gamma0: args.gamma0,
        alpha_bar: 1.0,
        horizon: args.horizon,
    };
    let times = args.times.unwrap_or_else(|| vec![args.horizon]);
    let modulus = ModulusEstimate::besov(args.s)?;
    let rows = bound_table(&params, &args.alphas, &times, &modulus, args.p)?;
    match args.output {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(fs::File::create(path)?);
            write_bound_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_bound_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, alpha, output } => simulate(config, alpha, output),
        Command::Sweep {
            config,
            output,
            workers,
        } => sweep(config, output, workers),
        Command::Flows { config, alpha, output } => flows(config, alpha, output),
        Command::Bounds(args) => bounds(args),
        Command::Report { input, output } => merge_reports(&input, &output).map(|_| ()),
    }
}

/// Parses `argv` and runs the command: 0 on success, 1 on invalid input,
/// 2 on a failure while running.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
