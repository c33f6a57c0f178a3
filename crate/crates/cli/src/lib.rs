//! Command-line front end for the orbit-holography engines.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Engine(#[from] orbit_holography::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use orbit_holography::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Engine(E::Domain(_)) => EXIT_VALIDATION,
            CliError::Engine(_) => EXIT_NUMERICAL,
        }
    }
}

/// Momenta, energies and times in atomic units; intensity in W/cm², wavelength in nm.
#[derive(Debug, Parser)]
#[command(name = "orbit-holography", version, about = "SFA and Coulomb quantum-orbit photoelectron momentum distributions")]
pub struct Cli {
    /// Worker threads (default: ORBIT_HOLOGRAPHY_THREADS, else all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Momentum distribution on a grid, written with a plot script
    Pmd(PmdArgs),
    /// Two-orbit interference panel from a PMD file
    Pair(PairArgs),
    /// Grouped SFA ionization times at one momentum
    Times(TimesArgs),
    /// Im t' along p_z = 0
    ScanImt(ScanArgs),
    /// Stokes-transition momentum versus emission angle
    Stokes(StokesArgs),
    /// Lobe centres, transverse width and critical ellipticity
    Estimate(EstimateArgs),
    /// Real-time trajectory of one Coulomb orbit
    Traj(TrajArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct PhysicsArgs {
    /// key = value config file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Peak intensity [W/cm²]
    #[arg(long)]
    pub intensity: Option<f64>,
    /// Wavelength [nm]
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Ponderomotive energy [a.u.], with --omega instead of intensity/wavelength
    #[arg(long)]
    pub up: Option<f64>,
    /// Angular frequency [a.u.]
    #[arg(long)]
    pub omega: Option<f64>,
    /// Ellipticity, 0 ≤ eps ≤ 1
    #[arg(long)]
    pub eps: Option<f64>,
    /// Offset phase [rad]
    #[arg(long)]
    pub phi: Option<f64>,
    /// Ionization potential [a.u.]
    #[arg(long)]
    pub ip: Option<f64>,
    /// Effective core charge [a.u.]
    #[arg(long)]
    pub z_eff: Option<f64>,
    /// Potential truncation multiplier for r0 = m·ip/E_max, or "off"
    #[arg(long)]
    pub truncation: Option<String>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SolverArgs {
    /// Propagation cycles after the ionization cycle
    #[arg(long)]
    pub n_prop: Option<u32>,
    /// Newton acceptance tolerance on the shooting residual [a.u.]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Newton iteration limit
    #[arg(long)]
    pub max_iterations: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PmdArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// sfa or cqsfa
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated orbit labels (a,b for sfa; a-d for cqsfa)
    #[arg(long)]
    pub orbits: Option<String>,
    /// Equal-weight field cycles summed coherently
    #[arg(long)]
    pub n_cycles: Option<u32>,
    /// Lower p_z edge [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub pz_min: Option<f64>,
    /// Upper p_z edge [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub pz_max: Option<f64>,
    /// p_z points
    #[arg(long)]
    pub n_z: Option<usize>,
    /// Lower p_x edge [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub px_min: Option<f64>,
    /// Upper p_x edge [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub px_max: Option<f64>,
    /// p_x points
    #[arg(long)]
    pub n_x: Option<usize>,
    /// Ionization matrix element: unit or hydrogenic
    #[arg(long)]
    pub dipole: Option<String>,
    /// SFA Stokes handling: auto, keep or discard
    #[arg(long)]
    pub stokes: Option<String>,
    /// Plot scale: linear or log10
    #[arg(long)]
    pub scale: Option<String>,
    /// Decades kept on the log10 scale
    #[arg(long)]
    pub floor: Option<f64>,
    /// Output PMD file
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// PMD file holding both orbits
    #[arg(long)]
    pub input: PathBuf,
    /// Two orbit labels, e.g. a,b
    #[arg(long)]
    pub pair: String,
    /// linear or log10
    #[arg(long, default_value = "log10")]
    pub scale: String,
    /// Decades kept on the log10 scale
    #[arg(long, default_value_t = 6.0)]
    pub floor: f64,
    /// Output table "pz px value"
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TimesArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Final momentum along the major axis [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub pz: f64,
    /// Final momentum along the minor axis [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub px: f64,
    /// Field cycle index
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub cycle: i64,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// sfa or cqsfa
    #[arg(long, default_value = "cqsfa")]
    pub method: String,
    /// Orbit labels to scan, comma-separated
    #[arg(long, default_value = "a,b,c,d")]
    pub orbits: String,
    /// final_px or initial_px
    #[arg(long, default_value = "final_px")]
    pub axis: String,
    /// Lowest p_x [a.u.]
    #[arg(long, default_value_t = -1.5, allow_hyphen_values = true)]
    pub px_min: f64,
    /// Highest p_x [a.u.]
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    pub px_max: f64,
    /// Number of samples
    #[arg(long, default_value_t = 21)]
    pub n: usize,
    /// Output prefix; one file per orbit, <prefix>_<orbit>.dat
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StokesArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Number of emission angles over [0, 2π)
    #[arg(long, default_value_t = 36)]
    pub n_angles: usize,
    /// Output table "angle p_crit"; stdout when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Lobe separation in units of the transverse width
    #[arg(long, default_value_t = 5.0)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct TrajArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Final momentum along the major axis [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub pz: f64,
    /// Final momentum along the minor axis [a.u.]
    #[arg(long, allow_hyphen_values = true)]
    pub px: f64,
    /// Orbit label a-d
    #[arg(long, default_value = "a")]
    pub orbit: String,
    /// Output dump "tau r_z r_x p_z p_x"
    #[arg(long, short)]
    pub output: PathBuf,
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("ORBIT_HOLOGRAPHY_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Config(format!("ORBIT_HOLOGRAPHY_THREADS: {v:?}")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs the CLI on `args` (program name first), writing reports to `out`.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: std::io::Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = write!(out, "{}", e.render());
            return code;
        }
    };
    let result = configure_threads(cli.threads).and_then(|_| commands::dispatch(cli.command, out));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
