use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rdo_cli::CliError;
use rdo_core::io::RunConfig;
use rdo_core::pipeline::Mode;

#[derive(Parser)]
#[command(name = "rdo", version, about = "Doppler-aware radar odometry on simulated scanning-radar data")]
struct Cli {
    /// Key = value configuration file; missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Simulation seed, overriding `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Fused)]
    mode: ModeArg,
    /// Worker threads for pair processing (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    Masked,
    Doppler,
    Fused,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => Mode::Raw,
            ModeArg::Masked => Mode::Masked,
            ModeArg::Doppler => Mode::Doppler,
            ModeArg::Fused => Mode::Fused,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render scan files and ground truth for a world and trajectory.
    Simulate { world: PathBuf, trajectory: PathBuf },
    /// Estimate relative poses between consecutive scans in a directory.
    Odometry { scans: PathBuf },
    /// KITTI-style errors of an estimate against ground truth.
    Eval { gt: PathBuf, est: PathBuf },
    /// SVG and CSV comparison of estimates against ground truth.
    Plot {
        gt: PathBuf,
        #[arg(num_args = 0..)]
        estimates: Vec<PathBuf>,
    },
}

fn require_out(out: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    out.ok_or_else(|| CliError::Other(format!("--out <{what}> is required")))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { world, trajectory } => {
            let out = require_out(cli.out, "dir")?;
            let n = rdo_cli::simulate(&world, &trajectory, &cfg, cli.seed, &out)?;
            println!("{n} scans written to {}", out.display());
        }
        Command::Odometry { scans } => {
            let out = require_out(cli.out, "file")?;
            if cli.jobs == Some(0) {
                return Err(CliError::Other("--jobs must be at least 1".into()));
            }
            let n = rdo_cli::odometry(&scans, &cfg, cli.mode.into(), cli.jobs, &out)?;
            println!("{n} pose rows written to {}", out.display());
        }
        Command::Eval { gt, est } => {
            let out = require_out(cli.out, "file")?;
            let errors = rdo_cli::eval(&gt, &est, &cfg, &out)?;
            println!("{}", rdo_cli::summary(&errors));
        }
        Command::Plot { gt, estimates } => {
            let out = require_out(cli.out, "file")?;
            let (svg, csv) = rdo_cli::plot(&estimates, &gt, &out)?;
            println!("wrote {} and {}", svg.display(), csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RDO_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
