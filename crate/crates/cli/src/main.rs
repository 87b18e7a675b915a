//! Command-line front end: single-point capacity solves, the binary-
//! optimality threshold curve, the capacity-versus-parameter sweeps behind
//! the figure data, and a built-in cross-check suite.
//!
//! Subcommands: `smith` (static amplitude constraint), `onoff` (two-state
//! instance with baselines), `ucurve` (threshold curve), `sweep` (figure
//! data as CSV/JSON), `validate` (fixed self-check suite).
//!
//! Exit codes: 0 on success, 1 on failed checks or I/O problems, 2 on usage
//! errors, 3 when a solve does not converge.

mod commands;
mod output;
mod settings;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use settings::{Format, Settings};

/// Failure modes, each mapped to a documented exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flag combinations or values — exit 2.
    Usage(String),
    /// A solve or bisection exhausted its budget — exit 3.
    NonConvergence(String),
    /// A cross-check or internal invariant failed — exit 1.
    Check(String),
    /// Output could not be written — exit 1.
    Io(String),
}

impl From<ehcap_core::Error> for Failure {
    fn from(e: ehcap_core::Error) -> Self {
        match e {
            ehcap_core::Error::NonConvergence(m) => Failure::NonConvergence(m),
            ehcap_core::Error::Domain(m) | ehcap_core::Error::Infeasible(m) => Failure::Usage(m),
        }
    }
}

// ---------------------------------------------------------------------------
// Flag definitions
// ---------------------------------------------------------------------------

/// Flags shared by every subcommand. All of them may also be supplied by a
/// `key=value` config file via `--config`; explicit flags win.
#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Optimality tolerance in nats [default: 1e-6]
    #[arg(long)]
    pub(crate) tol: Option<f64>,

    /// Quadrature points per unit-width panel [default: 32]
    #[arg(long = "quad-points")]
    pub(crate) quad_points: Option<usize>,

    /// Support-size cap for the capacity solver [default: 8]
    #[arg(long)]
    pub(crate) kmax: Option<usize>,

    /// Write the machine-readable document to this path
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,

    /// Output format for --out / stdout documents
    #[arg(long, value_enum)]
    pub(crate) format: Option<Format>,

    /// Also print capacities in bits (file formats stay in nats)
    #[arg(long)]
    pub(crate) bits: bool,

    /// Seed for the stochastic cross-checks [default: 0]
    #[arg(long)]
    pub(crate) seed: Option<u64>,

    /// key=value file supplying defaults for the flags above
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(
    name = "ehcap",
    version,
    about = "Capacity of amplitude-constrained Gaussian channels with causal state information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity of the static constraint |x| <= amplitude
    Smith {
        /// Amplitude bound (>= 0)
        #[arg(long)]
        amplitude: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Causal capacity and baselines of the on-off instance
    Onoff {
        /// Probability that a transmission opportunity arrives, in (0, 1]
        #[arg(long)]
        pon: f64,
        /// Energy per opportunity (on-state amplitude is its square root)
        #[arg(long)]
        energy: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Threshold curve U(p_on): largest on-amplitude with a binary optimum
    Ucurve {
        /// Comma-separated p_on grid [default: 0.1,0.2,...,1.0]
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Capacity sweep over p_on or energy (figure data)
    Sweep {
        /// Sweep axis
        #[arg(long, value_enum)]
        axis: commands::SweepAxis,
        /// The fixed value of the other parameter
        #[arg(long)]
        fixed: f64,
        /// Axis lower end
        #[arg(long)]
        lo: f64,
        /// Axis upper end
        #[arg(long)]
        hi: f64,
        /// Number of grid points (>= 2)
        #[arg(long)]
        steps: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the built-in cross-check suite; exit 0 iff every check passes
    Validate {
        /// Allowed gap between the solver and the dense-lattice
        /// cross-check. Tightening it below the lattice discretization gap
        /// (about 1e-5) makes the oracle checks fail by design.
        #[arg(long = "oracle-tol", default_value_t = 2e-3)]
        oracle_tol: f64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Smith { amplitude, common } => {
            let settings = Settings::resolve(&common)?;
            commands::cmd_smith(amplitude, &settings)
        }
        Command::Onoff { pon, energy, common } => {
            let settings = Settings::resolve(&common)?;
            commands::cmd_onoff(pon, energy, &settings)
        }
        Command::Ucurve { grid, common } => {
            let settings = Settings::resolve(&common)?;
            commands::cmd_ucurve(grid.as_deref(), &settings)
        }
        Command::Sweep { axis, fixed, lo, hi, steps, common } => {
            let settings = Settings::resolve(&common)?;
            commands::cmd_sweep(axis, fixed, (lo, hi, steps), &settings)
        }
        Command::Validate { oracle_tol, common } => {
            let settings = Settings::resolve(&common)?;
            commands::cmd_validate(oracle_tol, &settings)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Check(m) | Failure::Io(m) => (1, m),
                Failure::Usage(m) => (2, m),
                Failure::NonConvergence(m) => (3, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
