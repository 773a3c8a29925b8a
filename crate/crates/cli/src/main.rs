//! `jumpflow` command line: run a configured evolution and its ledger,
//! re-verify stored trajectories, and drive the sweep, probe and lift
//! experiments. Artifacts are CSV and versioned JSON.

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand, ValueEnum};
use commands::{LiftArgs, Outcome, Overrides};
use error::CliError;
use jumpflow::evolution::Method;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "jumpflow", version, about = "Gradient flows of jump processes on finite spaces")]
struct Cli {
    /// Output directory; defaults to the config's `output`, else the working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized test-function battery.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of checkpoint intervals, overriding the config.
    #[arg(long, global = true)]
    checkpoints: Option<usize>,
    /// Time integrator, overriding the config.
    #[arg(long, global = true)]
    method: Option<MethodArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Euler,
    Expm,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured system and write its trajectory and ledger.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute the ledger from a stored trajectory.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Density CSV written by `run`.
        #[arg(long)]
        trajectory: PathBuf,
        /// Flux CSV; without it the flux is rebuilt from the densities.
        #[arg(long)]
        flux: Option<PathBuf>,
    },
    /// Cutoff robustness sweep over `sweep.eps`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Ramp seminorm scaling on a uniform grid of [-1, 1].
    Probe {
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 4096)]
        n: usize,
        /// Comma-separated ramp half-widths.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
    /// Configuration-space lift of a fractional kernel on m points of [0, 1].
    Lift {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        particles: usize,
        #[arg(long, default_value_t = 0.6)]
        s: f64,
        #[arg(long, default_value = "linear_cosh")]
        triple: String,
        #[arg(long, default_value_t = 0.5)]
        t_final: f64,
    },
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    let ov = Overrides {
        out: cli.out,
        seed: cli.seed,
        checkpoints: cli.checkpoints,
        method: cli.method.map(|m| match m {
            MethodArg::Euler => Method::ExplicitEuler,
            MethodArg::Expm => Method::MatrixExponential,
        }),
    };
    match cli.command {
        Command::Run { config } => commands::run(&config, &ov),
        Command::Verify {
            config,
            trajectory,
            flux,
        } => commands::verify(&config, &trajectory, flux.as_deref(), &ov),
        Command::Sweep { config } => commands::sweep(&config, &ov),
        Command::Probe { s, n, deltas } => commands::probe(s, n, deltas, &ov),
        Command::Lift {
            m,
            particles,
            s,
            triple,
            t_final,
        } => commands::lift(
            &LiftArgs {
                m,
                particles,
                s,
                triple,
                t_final,
            },
            &ov,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = dispatch(cli).and_then(|o| {
        let written = o.artifacts.commit(&o.out_dir)?;
        print!("{}", o.summary);
        for p in written {
            println!("wrote {}", p.display());
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
