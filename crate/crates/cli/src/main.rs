use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ionsep_cli::commands;
use ionsep_cli::config::{ExperimentConfig, Overrides};
use ionsep_cli::CliError;
use ionsep_core::CostMode;

#[derive(Parser)]
#[command(name = "ionsep", version, about = "Fast two-ion separation: optimize, line-search, verify, noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the objective mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Overrides output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Harmonic,
    Cubic,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize every configured method over the time grid.
    Optimize,
    /// Fit the line of minima and sweep along it.
    LineSearch {
        /// Solution cloud; defaults to <out>/cloud.json.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Reconstruct and verify the controls of one parameter file.
    Verify {
        #[arg(long)]
        params: PathBuf,
    },
    /// Multiplicative control noise study; the first file is compared against the second.
    Noise {
        #[arg(long, required = true, num_args = 1..)]
        params: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        mode: cli.mode.map(|m| match m {
            ModeArg::Harmonic => CostMode::Harmonic,
            ModeArg::Cubic => CostMode::Cubic,
        }),
        out: cli.out,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Optimize => {
            let o = commands::optimize(&cfg)?;
            eprintln!("{} runs written to {}", o.records.len(), cfg.output_dir.display());
        }
        Command::LineSearch { cloud } => {
            let o = commands::line_search(&cfg, cloud.as_deref())?;
            eprintln!("{} sweeps written to {}", o.sweeps.len(), cfg.output_dir.display());
        }
        Command::Verify { params } => {
            let r = commands::verify(&cfg, &params)?;
            println!(
                "E_exc = {:e} hbar*omega0, beta_max = {:e} J/m^4 at t = {:e} s",
                r.report.e_exc_quanta, r.beta_max, r.beta_max_time
            );
        }
        Command::Noise { params } => {
            let o = commands::noise(&cfg, &params)?;
            if let Some(c) = &o.crossover {
                match c.crossover_sigma {
                    Some(s) => println!("crossover at sigma = {s}"),
                    None => println!("no crossover in the swept sigmas"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ionsep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
