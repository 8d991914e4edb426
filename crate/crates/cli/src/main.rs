use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liquidex::config::SweepParameter;
use liquidex::{CliError, CommandKind, Overrides};

#[derive(Parser)]
#[command(
    name = "liquidex",
    version,
    about = "Optimal liquidation experiments and verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulated price, position and control paths for each volatility.
    Paths(Common),
    /// One series per value of sigma, lambda or kappa on a shared seed.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: Option<SweepParameter>,
    },
    /// Discrete oracles against the closed form; exits 4 on a tolerance breach.
    OracleCheck(Common),
    /// Correlated portfolio gains and paths.
    Multi(Common),
    /// Drift presets, offset sensitivities and the round-trip profile.
    DriftDemo(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, common, param) = match cli.command {
        Command::Paths(c) => (CommandKind::Paths, c, None),
        Command::Sweep { common, param } => (CommandKind::Sweep, common, param),
        Command::OracleCheck(c) => (CommandKind::OracleCheck, c, None),
        Command::Multi(c) => (CommandKind::Multi, c, None),
        Command::DriftDemo(c) => (CommandKind::DriftDemo, c, None),
    };
    let overrides = Overrides {
        seed: common.seed,
        paths: common.paths,
        sweep_parameter: param,
    };
    let run = || liquidex::run(kind, common.config.as_deref(), &common.out, &overrides);
    let result = match common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(CliError::Config(format!("--threads: {e}"))),
        },
        None => run(),
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("liquidex: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
