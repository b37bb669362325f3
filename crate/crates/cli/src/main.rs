mod commands;
mod exit;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Radial spectral simulator for the 3D defocusing energy-critical NLS with
/// repulsive harmonic potential: runs, verification suites, bubble analysis,
/// and scattering diagnostics. Fully deterministic; no RNG anywhere.
#[derive(Parser)]
#[command(name = "rnls", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configured run and write its run directory.
    Simulate {
        /// JSON config file mirroring the run-configuration fields.
        #[arg(long)]
        config: PathBuf,
        /// Output run directory (default: $RNLS_OUT_ROOT/<config stem> or
        /// ./runs/<config stem>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accepted for interface stability; runs are always seedless.
        #[arg(long, default_value_t = true)]
        seedless: bool,
    },
    /// Re-check invariants of a finished run.
    Verify {
        /// Run directory produced by `simulate`.
        #[arg(long)]
        run: PathBuf,
        /// conservation | decay | morawetz | galilean | all
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Partition a run and emit per-interval bubble reports.
    Bubbles {
        #[arg(long)]
        run: PathBuf,
        /// Interval-norm target; defaults to the run config's eta1.
        #[arg(long)]
        eta1: Option<f64>,
        /// Frequency-threshold constant; defaults to the run config's eta2.
        #[arg(long)]
        eta2: Option<f64>,
    },
    /// Cauchy-trace scattering diagnostics of a finished run.
    Scatter {
        #[arg(long)]
        run: PathBuf,
        /// Decay-horizon smallness parameter; defaults to the config's
        /// eps_small.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Simulate every config matching a pattern and aggregate one CSV row
    /// per run (with the fitted L10-vs-gradient scaling exponent).
    Sweep {
        /// Config path pattern; `*` matches within the final component.
        #[arg(long)]
        configs: String,
        /// Output root (default: $RNLS_OUT_ROOT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, out, .. } => commands::simulate(&config, out.as_deref()),
        Command::Verify { run, suite } => commands::verify(&run, &suite),
        Command::Bubbles { run, eta1, eta2 } => commands::bubbles(&run, eta1, eta2),
        Command::Scatter { run, eps } => commands::scatter(&run, eps),
        Command::Sweep { configs, out } => commands::sweep(&configs, out.as_deref()),
    };
    match outcome {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit::code_for(&err));
        }
    }
}
