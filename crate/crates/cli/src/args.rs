use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "crn",
    version,
    about = "Kinetics, large deviations and thermodynamics of reaction networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stoichiometric structure: conservation laws, cycles, Wegscheider and complex balance.
    Check(CheckArgs),
    /// Integrate the deterministic rate equations.
    Ode(OdeArgs),
    /// Gillespie sample paths.
    Ssa(SsaArgs),
    /// Transient or stationary solution of the truncated master equation.
    Cme(CmeArgs),
    /// Thermodynamic functionals along a deterministic or mesoscopic evolution.
    Thermo(ThermoArgs),
    /// One-species quasi-potential tabulated on a grid.
    Quasipotential(QuasiArgs),
    /// Fluctuation–dissipation check at a fixed point.
    Fdt(FdtArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Network description in the `.crn` text format.
    pub file: PathBuf,
    /// Write to this file instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Output format; defaults to the natural one for the subcommand.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Scheme {
    #[default]
    Scaled,
    Combinatorial,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Starting point for the steady state used by the complex-balance test.
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    /// Random states for the sampled Wegscheider verdict (non-mass-action laws).
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Initial concentrations; defaults to the file's `conc` lines.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub t_end: f64,
    /// Output spacing; every accepted step when omitted.
    #[arg(long)]
    pub dt_out: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
}

#[derive(Debug, Args)]
pub struct SsaArgs {
    #[command(flatten)]
    pub common: Common,
    /// System size; defaults to the file's `volume` line.
    #[arg(long)]
    pub volume: Option<f64>,
    /// Initial copy numbers; defaults to the rounded `conc` lines times the volume.
    #[arg(long, value_delimiter = ',')]
    pub n0: Option<Vec<u64>>,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Resample every path on a uniform grid with this spacing instead of listing jumps.
    #[arg(long)]
    pub grid: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub scheme: Scheme,
}

#[derive(Debug, Args)]
pub struct CmeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub volume: Option<f64>,
    /// Truncation box as `lo:hi` per species, comma separated.
    #[arg(long = "box")]
    pub bounds: String,
    /// Initial state (point mass); selects the closed class for `--steady`.
    #[arg(long, value_delimiter = ',')]
    pub n0: Option<Vec<u64>>,
    #[arg(long, conflicts_with = "steady", required_unless_present = "steady")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub steady: bool,
    #[arg(long, value_enum, default_value_t)]
    pub scheme: Scheme,
}

#[derive(Debug, Args)]
pub struct ThermoArgs {
    #[command(flatten)]
    pub common: Common,
    /// Deterministic functionals σ_tot, f_d, q_hk along the rate equations.
    #[arg(long, conflicts_with = "meso", required_unless_present = "meso")]
    pub r#macro: bool,
    /// Master-equation functionals e_p, f_d, Q_hk and the free energy.
    #[arg(long)]
    pub meso: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Fixed point that anchors the quasi-potential; found by relaxing from `--x0` when omitted.
    #[arg(long, value_delimiter = ',')]
    pub anchor: Option<Vec<f64>>,
    /// Grid `lo:hi:n` for a tabulated one-species quasi-potential.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub volume: Option<f64>,
    #[arg(long = "box")]
    pub bounds: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub n0: Option<Vec<u64>>,
    #[arg(long, default_value_t = 0.0)]
    pub t_end: f64,
    #[arg(long)]
    pub dt_out: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub scheme: Scheme,
}

#[derive(Debug, Args)]
pub struct QuasiArgs {
    #[command(flatten)]
    pub common: Common,
    /// Stable fixed point (Newton-polished before use).
    #[arg(long)]
    pub anchor: f64,
    /// Grid `lo:hi:n`.
    #[arg(long)]
    pub grid: String,
}

#[derive(Debug, Args)]
pub struct FdtArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fixed point (Newton-polished before use).
    #[arg(long, value_delimiter = ',')]
    pub anchor: Vec<f64>,
    /// Grid `lo:hi:n` for a tabulated one-species quasi-potential.
    #[arg(long)]
    pub grid: Option<String>,
    /// Also estimate the stationary covariance from the diffusion approximation.
    #[arg(long, requires = "volume")]
    pub simulate: bool,
    #[arg(long)]
    pub volume: Option<f64>,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
