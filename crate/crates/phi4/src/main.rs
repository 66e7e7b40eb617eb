//! Command-line interface: four subcommands over the library drivers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical blow-up,
//! 4 selfcheck failure, 1 other runtime fault. Failures emit one
//! machine-readable JSON record on stderr.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phi4::config::{load_config, Mode, Overrides};
use phi4::run::{exit_code, run, EXIT_SELFCHECK};
use phi4::Error;

/// Pseudo-spectral simulator and analysis toolkit for the dynamical Phi^4
/// model on the 3-torus.
#[derive(Parser)]
#[command(name = "phi4", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble of trajectories; write snapshots and series.
    Simulate {
        /// TOML configuration file; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Spectral cutoff order.
        #[arg(long = "N")]
        n: Option<u32>,
        /// Mass parameter.
        #[arg(long)]
        m0: Option<f64>,
        /// Coupling constant.
        #[arg(long)]
        lambda: Option<f64>,
        /// Time horizon.
        #[arg(long = "T")]
        t_final: Option<f64>,
        /// Time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Retained modes per axis (default 2^(N+2)).
        #[arg(long = "K")]
        k: Option<usize>,
        /// Physical grid points per axis (default FFT-friendly >= 4K+1).
        #[arg(long = "M")]
        m: Option<usize>,
        /// Master RNG seed; trajectory i uses stream i.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of independent trajectories.
        #[arg(long)]
        ensemble: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate renormalization constants for cutoff orders 0..=N.
    RenormTable {
        /// TOML configuration file; flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Largest cutoff order.
        #[arg(long = "N")]
        n: Option<u32>,
        /// Mass parameter.
        #[arg(long)]
        m0: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-level moment tables for the uniformity audit.
    TightnessReport {
        /// TOML configuration file (levels span 0..=n from its model).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit core numerical invariants (exit code 4 on failure).
    Selfcheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = exit_code(&err);
            let record = serde_json::json!({ "error": err.to_string(), "exit_code": code });
            eprintln!("{record}");
            ExitCode::from(code as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    let (config_path, over) = match cli.command {
        Command::Simulate {
            config,
            n,
            m0,
            lambda,
            t_final,
            dt,
            k,
            m,
            seed,
            ensemble,
            out,
        } => (
            config,
            Overrides {
                n,
                m0,
                lambda,
                t_final,
                dt,
                k,
                m,
                seed,
                ensemble,
                output_dir: out,
                mode: Some(Mode::Simulate),
            },
        ),
        Command::RenormTable { config, n, m0, out } => (
            config,
            Overrides {
                n,
                m0,
                output_dir: out,
                mode: Some(Mode::RenormTable),
                ..Overrides::default()
            },
        ),
        Command::TightnessReport { config, out } => (
            Some(config),
            Overrides {
                output_dir: out,
                mode: Some(Mode::TightnessReport),
                ..Overrides::default()
            },
        ),
        Command::Selfcheck => (
            None,
            Overrides {
                mode: Some(Mode::Selfcheck),
                ..Overrides::default()
            },
        ),
    };
    let text = match &config_path {
        Some(path) => Some(fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?),
        None => None,
    };
    let config = load_config(text.as_deref(), &over)?;
    let outcome = run(&config)?;
    for line in &outcome.lines {
        println!("{line}");
    }
    if outcome.failed_checks > 0 {
        return Ok(ExitCode::from(EXIT_SELFCHECK as u8));
    }
    Ok(ExitCode::SUCCESS)
}
