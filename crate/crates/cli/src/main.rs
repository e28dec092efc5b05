mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Simulate, verify and synthesize feedback for hybrid systems with inputs and disturbances.
#[derive(Parser, Debug)]
#[command(name = "invhyb", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Membership tolerance for verification and event location.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Grid spacing for the sampled checks.
    #[arg(long, global = true)]
    pub grid: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SystemArgs {
    /// Built-in system id (see `list-systems`).
    #[arg(long)]
    pub system: Option<String>,
    /// Registered feedback name, or `min-norm` for the synthesized law.
    #[arg(long)]
    pub feedback: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    PreInvariance,
    Invariance,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum JumpArg {
    First,
    Uniform,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    BouncingBall,
    RobotArm,
    Planar,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List built-in systems and their feedbacks.
    ListSystems,
    /// Simulate one closed-loop solution; writes a trajectory CSV and a summary JSON.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Flow-time horizon.
        #[arg(long = "T")]
        horizon_t: Option<f64>,
        /// Jump horizon.
        #[arg(long = "J")]
        horizon_j: Option<usize>,
        #[arg(long, value_enum)]
        jump_selector: Option<JumpArg>,
        /// Exit with status 1 when an invariance check fails.
        #[arg(long)]
        require_invariant: bool,
        /// Tolerance of the invariance checks.
        #[arg(long, default_value_t = 1e-6)]
        inv_tol: f64,
    },
    /// Run the certificate and closed-loop checks on a grid.
    Verify {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        /// Record linear growth of the flow map as attested by the user.
        #[arg(long)]
        attest_linear_growth: bool,
    },
    /// Build the pointwise min-norm feedback; writes a feedback table and a descriptor.
    Synthesize {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        /// Skip the certificate checks.
        #[arg(long)]
        force: bool,
    },
    /// Re-run one of the reference experiments.
    Reproduce {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Feedback pair to compare (bouncing ball only).
        #[arg(long, value_delimiter = ',')]
        feedbacks: Option<Vec<String>>,
        /// Number of seeded runs (planar only).
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("INVHYB_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
