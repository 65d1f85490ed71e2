//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use sysrisk::commands::{self, Options};
use sysrisk::config::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "sysrisk", version, about = "Forecast evaluation for set-valued systemic risk measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the config file.
    #[arg(long, global = true, env = "SYSRISK_SEED")]
    seed: Option<u64>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Significance level of the tests.
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Rejection rates of the Anne-versus-Bob comparison.
    Table1,
    /// Murphy diagrams and traffic-light zones for three forecaster pairs.
    Murphy,
    /// Eisenberg-Noe clearing of endowment rows.
    Clearing,
    /// Mixture scores of two forecast sets against observations.
    Score,
    /// Efficient allocations and the identification check.
    Ear,
    /// One-sided identification backtest of reported allocations.
    Backtest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter)).init();
    let Some(path) = &cli.config else {
        Cli::command().error(ErrorKind::MissingRequiredArgument, "--config <CONFIG> is required").exit();
    };
    let cfg = ConfigFile::load(path);
    let opts = Options { out: cli.out.clone(), seed: cli.seed, workers: cli.workers, level: cli.level };
    let result = cfg.and_then(|cfg| match cli.command {
        Command::Table1 => commands::table1(&cfg, &opts),
        Command::Murphy => commands::murphy(&cfg, &opts),
        Command::Clearing => commands::clearing(&cfg, &opts),
        Command::Score => commands::score(&cfg, &opts),
        Command::Ear => commands::ear(&cfg, &opts),
        Command::Backtest => commands::backtest(&cfg, &opts),
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
