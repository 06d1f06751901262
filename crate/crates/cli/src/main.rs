use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fuzzdrive::commands::{self, Context, Overrides};

#[derive(Parser)]
#[command(
    name = "fuzzdrive",
    version,
    about = "Fuzzy speed control of an induction motor drive"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Swarm seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Integration step (s).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Simulated time (s): truncates scenarios, or sets the tuning horizon.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and metrics.json.
    Simulate {
        #[arg(long)]
        scenario: Option<String>,
        /// Params file, `baseline` or `tune`.
        #[arg(long)]
        params: Option<String>,
    },
    /// Tune the controller; writes history.csv and best.params.
    Tune,
    /// Run two parameter sets on one scenario; writes report.json.
    Compare {
        #[arg(long)]
        scenario: Option<String>,
        /// Give twice: params file, `baseline` or `tune`.
        #[arg(long, required = true)]
        params: Vec<String>,
    },
    /// Check the swarm hyperparameters against the convergence conditions.
    CheckStability,
    /// List the available scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::ListScenarios = cli.command {
        commands::list_scenarios();
        return ExitCode::SUCCESS;
    }
    let overrides = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir,
        dt: cli.dt,
        horizon: cli.horizon,
    };
    let result =
        Context::load(cli.config.as_deref(), &overrides).and_then(|ctx| match &cli.command {
            Command::Simulate { scenario, params } => {
                commands::simulate(&ctx, scenario.as_deref(), params.as_deref())
            }
            Command::Tune => commands::tune(&ctx).map(|_| ()),
            Command::Compare { scenario, params } => {
                commands::compare(&ctx, scenario.as_deref(), params)
            }
            Command::CheckStability => commands::check_stability_cmd(&ctx),
            Command::ListScenarios => unreachable!("handled above"),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
