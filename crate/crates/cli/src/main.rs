use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "polfiber", version, about = "Polarization-entanglement transmission through fiber")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's output_dir, then
    /// ./polfiber-out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo gates per setting.
    #[arg(long)]
    gates: Option<u64>,
    /// Comma-separated lengths in km; an empty string selects none.
    #[arg(long)]
    lengths: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Model, simulated and background-corrected visibility against length.
    VisibilityCurve {
        #[command(flatten)]
        common: Common,
    },
    /// Simulated state tomography and log-negativity per length.
    Tomography {
        #[command(flatten)]
        common: Common,
        /// Overrides the scenario's repeat count.
        #[arg(long)]
        repeats: Option<u32>,
    },
    /// QBER, sifted and secure key rate per length.
    Keyrate {
        #[command(flatten)]
        common: Common,
    },
    /// Longest distance at which the raw visibility stays above threshold.
    MaxDistance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Monte Carlo against the analytic model; exits 3 on disagreement.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Multiplies the analytic transmission, to check that the
        /// comparison catches a wrong model.
        #[arg(long, default_value_t = 1.0, hide = true)]
        inject_transmission_scale: f64,
    },
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_ORACLE: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .downcast_ref::<polfiber_core::Error>()
                .is_some_and(polfiber_core::Error::is_numerical);
            ExitCode::from(if numerical { EXIT_NUMERICAL } else { EXIT_USAGE })
        }
    }
}
