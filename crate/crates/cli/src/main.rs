use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcjoint::estimators::Method;
use mcjoint::powerfit::Side;
use mcjoint::resampling::IntervalKind;
use mcjoint::robustcov::CovEstimator;
use mcjoint_cli::commands::{cmd_fit_power, cmd_simulate, cmd_validate, FitPowerArgs, SimulateArgs, ValidateArgs};
use mcjoint_cli::config::Scale;
use mcjoint_cli::CliError;

/// Method comparison validation with bootstrap joint confidence ellipses.
///
/// Exit codes: 0 success (validate: accepted by the joint-ellipse test),
/// 3 rejected by the joint-ellipse test, 1 runtime error, 2 usage error
/// (bad flags, missing input, malformed plan or curve).
///
/// MCJOINT_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "mcjoint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate one paired dataset: fit, bootstrap, CI and joint-ellipse
    /// verdicts. Writes report.json, plot.svg and ensemble.csv.
    Validate {
        /// Two-column CSV with header; column 1 is the reference method (x).
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        input: Option<PathBuf>,
        /// Bundled dataset instead of --input (hemoglobin).
        #[arg(long)]
        builtin: Option<String>,
        /// Swap the two columns.
        #[arg(long)]
        swap: bool,
        /// dem, wdem, mdem, mmdem or paba.
        #[arg(long)]
        method: Method,
        /// classic, mcd, sde, sest or rocke.
        #[arg(long, default_value = "mcd")]
        cov: CovEstimator,
        /// Bootstrap replicates.
        #[arg(long, default_value_t = 2000)]
        b: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        je_alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        ci_alpha: f64,
        /// bca, percentile, studentized or analytic (PaBa only).
        #[arg(long, default_value = "bca")]
        ci: IntervalKind,
        #[arg(long, default_value = "mcjoint-out")]
        out: PathBuf,
    },
    /// Run a simulation plan (type1, power, precision or heteroscedastic).
    /// Re-running into the same --out resumes from completed grid points.
    Simulate {
        /// Plan file (key = value with [sections]).
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_enum, default_value = "desk")]
        scale: Scale,
        /// Overrides the plan's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "mcjoint-sim")]
        out: PathBuf,
    },
    /// Fit rejection curves from `simulate` and report the 80%-power level
    /// and the type-I acceptance at the null, with calibration intervals.
    FitPower {
        /// Curve CSV written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// Side of the null to invert on: above or below.
        #[arg(long, default_value = "above")]
        side: Side,
        /// Target power.
        #[arg(long, default_value_t = 0.8)]
        power: f64,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn set_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("MCJOINT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("MCJOINT_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failure(e.into()))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    set_threads()?;
    match cli.command {
        Command::Validate {
            input,
            builtin,
            swap,
            method,
            cov,
            b,
            seed,
            je_alpha,
            ci_alpha,
            ci,
            out,
        } => cmd_validate(&ValidateArgs {
            input,
            builtin,
            swap,
            method,
            cov,
            b,
            seed,
            je_alpha,
            ci_alpha,
            ci,
            out,
        }),
        Command::Simulate { plan, scale, seed, out } => cmd_simulate(&SimulateArgs { plan, scale, out, seed }),
        Command::FitPower {
            input,
            side,
            power,
            out,
        } => cmd_fit_power(&FitPowerArgs {
            input,
            side,
            target: power,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
