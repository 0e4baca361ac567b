use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graphflow_cli::{
    cmd_fit, cmd_rescale_check, cmd_run, cmd_verify, exit, Failure, RunConfig, Suite,
};
use graphflow_core::DecayClaim;

#[derive(Parser)]
#[command(
    name = "graphflow",
    version,
    about = "Graphical mean curvature flow laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the flow and write diagnostics and snapshots.
    Run { config: PathBuf },
    /// Run a verification suite.
    Verify {
        config: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
    },
    /// Fit a decay claim to a diagnostics CSV and print it as JSON.
    Fit {
        csv: PathBuf,
        #[arg(long, value_parser = parse_claim)]
        claim: DecayClaim,
    },
    /// Check parabolic scaling covariance for one factor.
    RescaleCheck {
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        tau: f64,
    },
}

fn parse_claim(s: &str) -> Result<DecayClaim, String> {
    s.parse().map_err(|e: graphflow_core::Error| e.to_string())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Run { config } => cmd_run(&RunConfig::load(&config)?, &mut out).map(drop),
        Command::Verify { config, suite } => {
            cmd_verify(&RunConfig::load(&config)?, suite, &mut out).map(drop)
        }
        Command::Fit { csv, claim } => cmd_fit(&csv, claim, &mut out).map(drop),
        Command::RescaleCheck { config, tau } => {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Failure::malformed(format!("--tau {tau} must be positive")));
            }
            cmd_rescale_check(&RunConfig::load(&config)?, tau, &mut out).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::MALFORMED
            } else {
                exit::OK
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = std::io::stdout().flush();
            eprintln!("graphflow: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
