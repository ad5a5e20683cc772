use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fieldlab::cli::{self, CliError};

#[derive(Parser)]
#[command(name = "fieldlab", version, about = "Nonlocal constants and conserved currents of lattice scalar field theories")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for lattice kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the parsed density and the quantities derived from it.
    Parse {
        /// Lagrangian file, scenario file or preset id.
        path: Option<String>,
        #[arg(long, conflicts_with = "path")]
        scenario: Option<String>,
    },
    /// Evolve a scenario and verify every requested current.
    Run {
        /// Scenario file or preset id.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed of random initial data.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat a scenario over spatial resolutions and fit convergence orders.
    Converge {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sites per spatial axis, e.g. 32,64,128.
        #[arg(long)]
        resolutions: String,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn threads(n: Option<usize>) -> Result<(), CliError> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(())
}

fn dispatch(args: Args) -> Result<i32, CliError> {
    threads(args.threads)?;
    match args.command {
        Command::Parse { path, scenario } => {
            let arg = path.or(scenario).ok_or_else(|| CliError::Usage("parse needs a path".into()))?;
            print!("{}", cli::cmd_parse(&arg)?);
            Ok(0)
        }
        Command::Run { scenario, out, seed } => {
            let s = cli::load_scenario(&scenario)?;
            let out = out.unwrap_or_else(|| cli::default_out(&s));
            cli::cmd_run(&s, &out, seed)
        }
        Command::Converge { scenario, out, resolutions, seed } => {
            let s = cli::load_scenario(&scenario)?;
            let out = out.unwrap_or_else(|| cli::default_out(&s));
            cli::cmd_converge(&s, &out, &cli::parse_resolutions(&resolutions)?, seed)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fieldlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
