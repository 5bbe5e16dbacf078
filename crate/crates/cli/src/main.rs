use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trtlbm::harness::{self, CommandOptions, ExperimentConfig};
use trtlbm::Error;

/// TRT lattice Boltzmann solver for scalar conservation laws.
#[derive(Parser, Debug)]
#[command(name = "trtlbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report the monotonicity verdict and bounds for the configured relaxation.
    Check(Common),
    /// Run one simulation and write the final field and the time series.
    Run(Common),
    /// L-inf(L1) errors against the oracle over a resolution ladder.
    Convergence(Common),
    /// Rasterise the monotonicity region and check its shape.
    Region(Common),
    /// Distance-to-equilibrium study.
    Eqdist(Common),
    /// Maximum-principle scan along the magic or BGK line.
    Maxprinciple(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment description; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and large grids.
    #[arg(long)]
    threads: Option<usize>,
    /// Oracle refinement factor.
    #[arg(long)]
    oracle_refine: Option<usize>,
    /// Reduced ladders and resolutions.
    #[arg(long)]
    quick: bool,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::NonFinite { .. } => ExitCode::from(EXIT_BLOWUP),
        Error::Io(_) | Error::Csv(_) => ExitCode::FAILURE,
        _ => ExitCode::from(EXIT_CONFIG),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::Check(c)
    | Command::Run(c)
    | Command::Convergence(c)
    | Command::Region(c)
    | Command::Eqdist(c)
    | Command::Maxprinciple(c)) = &cli.command;

    if let Some(k) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let cfg = match &c.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => return fail(&e),
        },
        None => ExperimentConfig::default(),
    };
    if c.oracle_refine == Some(0) {
        eprintln!("error: --oracle-refine must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    let opts = CommandOptions { out: c.out.clone(), write: true, oracle_refine: c.oracle_refine, quick: c.quick };

    let printed = match &cli.command {
        Command::Check(_) => harness::cmd_check(&cfg).map(|r| r.to_string()),
        Command::Run(_) => match harness::cmd_run(&cfg, &opts) {
            Ok(r) if r.outcome.blew_up.is_some() => {
                println!("{r}");
                return ExitCode::from(EXIT_BLOWUP);
            }
            other => other.map(|r| r.to_string()),
        },
        Command::Convergence(_) => harness::cmd_convergence(&cfg, &opts).map(|r| r.to_string()),
        Command::Region(_) => harness::cmd_region(&cfg, &opts).map(|r| r.to_string()),
        Command::Eqdist(_) => harness::cmd_eqdist(&cfg, &opts).map(|r| r.to_string()),
        Command::Maxprinciple(_) => harness::cmd_maxprinciple(&cfg, &opts).map(|r| r.to_string()),
    };
    match printed {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
