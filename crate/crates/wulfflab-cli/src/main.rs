//! Experiment driver for the anisotropic free-energy laboratory.
//!
//! Every subcommand reads either a strict versioned JSON config or the
//! equivalent command-line flags, writes its outputs (`record.json`, CSV
//! tables, SVG figures, OFF meshes) into a run directory, and exits with
//! 0 on success, 1 on domain/usage errors, 2 on numerical non-convergence.

mod cmds;
mod config;
mod outputs;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wulfflab::WulffError;

#[derive(Parser)]
#[command(name = "wulfflab", version, about = "mass-constrained anisotropic free-energy experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Construct the Wulff shape of a surface tension at a given mass.
    Wulff(WulffArgs),
    /// Minimize surface + potential energy at fixed mass from multiple starts.
    Minimize(MinimizeArgs),
    /// Sweep the minimization over a mass grid with convexity diagnostics.
    Sweep(SweepArgs),
    /// Estimate the stability modulus and its mass-scaling exponent.
    Modulus(ModulusArgs),
    /// Solve the prescribed-curvature graph equation and its diagnostics.
    Graphpde(GraphpdeArgs),
    /// Plant a rigid motion on a Wulff body and recover it by alignment.
    Align(AlignArgs),
    /// Aggregate record.json files from run directories into a report.
    Report(ReportArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; overrides the other flags entirely.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResolutionArgs {
    /// Polar grid rows.
    #[arg(long, default_value_t = 24)]
    n_theta: usize,
    /// Azimuthal grid columns.
    #[arg(long, default_value_t = 48)]
    n_phi: usize,
    /// Direction-sphere sample count for defect/support computations.
    #[arg(long, default_value_t = 96)]
    n_rays: usize,
}

impl ResolutionArgs {
    fn spec(&self) -> config::ResolutionSpec {
        config::ResolutionSpec { n_theta: self.n_theta, n_phi: self.n_phi, n_rays: self.n_rays }
    }
}

#[derive(Args)]
struct WulffArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Surface tension: `euclidean`, `ellipsoidal:a,b,c`, `smooth-lp:p,eps`.
    #[arg(long, default_value = "euclidean")]
    tension: String,
    /// Enclosed volume of the output body.
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[command(flatten)]
    resolution: ResolutionArgs,
}

#[derive(Args)]
struct MinimizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "euclidean")]
    tension: String,
    /// Potential: `zero`, `radial-quadratic`, `radial-power:k`, `gravity[:rho]`,
    /// `flat-bottom:r`, `double-well:x,y,z`.
    #[arg(long, default_value = "zero")]
    potential: String,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Convergence tolerance on `sup |H_f - (mu - g)| / mean |H_f|`.
    #[arg(long, default_value_t = 0.02)]
    residual_tol: f64,
    /// Comma list of starts: `wulff`, `ball`, `random:k`.
    #[arg(long, default_value = "wulff,ball,random:0,random:1")]
    starts: String,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[command(flatten)]
    resolution: ResolutionArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "euclidean")]
    tension: String,
    #[arg(long, default_value = "radial-quadratic")]
    potential: String,
    /// Mass grid: comma list or `lo:hi:n` (log-spaced).
    #[arg(long, default_value = "0.1:10:8")]
    masses: String,
    /// Modulus probe scale used in the ratio series.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Convexity-defect threshold for flagging a run.
    #[arg(long, default_value_t = 1e-2)]
    defect_tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value = "ball,random:0")]
    starts: String,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[command(flatten)]
    resolution: ResolutionArgs,
}

#[derive(Args)]
struct ModulusArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "euclidean")]
    tension: String,
    #[arg(long, default_value = "zero")]
    potential: String,
    #[arg(long, default_value = "0.02:0.2:6")]
    masses: String,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Competitor evaluations per mass.
    #[arg(long, default_value_t = 60)]
    budget: usize,
    /// Ambient dimension, 2 or 3.
    #[arg(long, default_value_t = 3)]
    dimension: u32,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value = "ball")]
    starts: String,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[command(flatten)]
    resolution: ResolutionArgs,
}

#[derive(Args)]
struct GraphpdeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `manufactured-paraboloid`, `manufactured-ruled`, `manufactured-quartic`, `cap`.
    #[arg(long, default_value = "manufactured-paraboloid")]
    case: String,
    /// Comma list of grid spacings.
    #[arg(long, default_value = "0.03125,0.015625")]
    h: String,
    /// Curvature scalar for the `cap` case.
    #[arg(long, default_value_t = 2.0)]
    mu: f64,
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "ellipsoidal:1,1.5,2")]
    tension: String,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Invariance group searched: `translations` or `rigid`.
    #[arg(long, default_value = "rigid")]
    group: String,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[command(flatten)]
    resolution: ResolutionArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory whose subdirectories hold record.json files.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
    /// Output directory for summary.md and summary.svg.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying its process exit code.
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl From<WulffError> for CliError {
    fn from(e: WulffError) -> Self {
        let code = match e {
            WulffError::NonConvergence(_) => 2,
            _ => 1,
        };
        CliError { message: e.to_string(), code }
    }
}

impl From<String> for CliError {
    fn from(message: String) -> Self {
        CliError { message, code: 1 }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { message: format!("i/o error: {e}"), code: 1 }
    }
}

pub type CliResult = Result<(), CliError>;

fn setup_threads() {
    #[cfg(feature = "parallel")]
    if let Ok(v) = std::env::var("WULFFLAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Keep --help/--version on stdout with success.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    setup_threads();
    let outcome = match cli.cmd {
        Cmd::Wulff(a) => cmds::wulff(&a),
        Cmd::Minimize(a) => cmds::minimize(&a),
        Cmd::Sweep(a) => cmds::sweep(&a),
        Cmd::Modulus(a) => cmds::modulus(&a),
        Cmd::Graphpde(a) => cmds::graphpde(&a),
        Cmd::Align(a) => cmds::align(&a),
        Cmd::Report(a) => cmds::report(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
