use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corosa_cli::{CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "corosa", version, about = "Adaptive TV / Hessian-Schatten image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a blurred or undersampled measurement from a ground truth.
    Simulate(Common),
    /// Restore an image from a measurement.
    Restore(Common),
    /// Append SSIM/SNR scores of restored images to a CSV report.
    Evaluate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Noise seed, replacing `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated regularization weights to sweep (restore only).
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Output directory, replacing `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Restore(c) => ("restore", c),
        Command::Evaluate(c) => ("evaluate", c),
    };
    if common.lambda_grid.is_some() && name != "restore" {
        log::warn!("--lambda-grid is ignored by {name}");
    }
    let cfg = RunConfig::load(&common.config)?;
    let overrides = Overrides {
        seed: common.seed,
        lambda_grid: common.lambda_grid.clone(),
        out: common.out.as_deref().map(std::path::absolute).transpose().map_err(|e| CliError::Config(e.to_string()))?,
    };
    match cli.command {
        Command::Simulate(_) => {
            corosa_cli::simulate(&cfg, &overrides)?;
        }
        Command::Restore(_) => {
            corosa_cli::restore(&cfg, &overrides)?;
        }
        Command::Evaluate(_) => {
            let csv = corosa_cli::evaluate(&cfg, &overrides)?;
            println!("{}", csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
