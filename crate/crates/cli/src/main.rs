mod commands;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use struct_dae_core::DaeError;

/// Structure checks, canonical forms, reduction and simulation of self- and
/// skew-adjoint DAEs.
#[derive(Parser, Debug)]
#[command(name = "struct-dae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Self-/skew-adjointness residuals of a pair.
    Check(CheckArgs),
    /// Smooth rank or inertia factorization of one coefficient.
    Factor(FactorArgs),
    /// Global canonical form of a constant pair.
    Canonical(CanonicalArgs),
    /// Structured reduction to an ODE core.
    Reduce(ReduceArgs),
    /// Implicit midpoint trajectory written as CSV.
    Simulate(SimulateArgs),
    /// Fundamental solution of a reduced core and its invariant defect.
    Flow(FlowArgs),
    /// Writes an example model file.
    Demo(DemoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    #[value(name = "self")]
    SelfAdjoint,
    #[value(name = "skew")]
    SkewAdjoint,
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Pipeline {
    Semidefinite,
    Stokes,
    #[value(name = "self")]
    SelfAdjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FactorMethod {
    Rank,
    Sym,
    Inertia,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    Circuit,
    Stokes,
    Multibody,
    Ocp,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Number of grid points.
    #[arg(long, default_value_t = 401)]
    pub grid: usize,
    /// Residual tolerance; scaled default when absent.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Structure to test; the model's declared structure when absent.
    #[arg(long, value_enum)]
    pub structure: Option<StructureArg>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct FactorArgs {
    /// A matrix-function file or a model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Coefficient of a model file to factor.
    #[arg(long, default_value = "e")]
    pub matrix: String,
    #[arg(long, value_enum)]
    pub method: Option<FactorMethod>,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub gap_tol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct CanonicalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub structure: Option<StructureArg>,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Include the transform sampled on the grid.
    #[arg(long)]
    pub transform: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub pipeline: Pipeline,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct TimeArgs {
    /// Start time; the model's when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// End time; the model's when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub tf: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Initial full state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Integrate a reduced core instead of the full pair.
    #[arg(long, value_enum)]
    pub pipeline: Option<Pipeline>,
    /// Co-compute the fundamental solution and add a flow_defect column.
    #[arg(long)]
    pub with_flow: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub pipeline: Option<Pipeline>,
    #[command(flatten)]
    pub time: TimeArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub name: DemoName,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub tf: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    pub l: f64,
    #[arg(long = "C1", default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long = "C2", default_value_t = 1.0)]
    pub c2: f64,
    #[arg(long = "RL", default_value_t = 0.0)]
    pub rl: f64,
    #[arg(long = "RG", default_value_t = 0.0)]
    pub rg: f64,
    #[arg(long = "RR", default_value_t = 0.0)]
    pub rr: f64,
    #[arg(long, default_value_t = 6)]
    pub nv: usize,
    #[arg(long, default_value_t = 2)]
    pub np: usize,
    /// Overridden by STRUCT_DAE_SEED.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the dissipative Stokes blocks.
    #[arg(long)]
    pub lossy: bool,
    /// Multibody formulation.
    #[arg(long, value_enum, default_value = "skew")]
    pub form: StructureArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug)]
pub enum CliError {
    /// A structural check failed.
    Structure(String),
    /// Bad input or invocation.
    Usage(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Structure(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<DaeError> for CliError {
    fn from(e: DaeError) -> Self {
        let mut inner = &e;
        while let DaeError::Stage { source, .. } = inner {
            inner = source;
        }
        match inner {
            DaeError::Structure { .. } => CliError::Structure(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Structure(m) => write!(f, "structure check failed: {m}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => commands::check(&a),
        Command::Factor(a) => commands::factor(&a),
        Command::Canonical(a) => commands::canonical(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Flow(a) => commands::flow(&a),
        Command::Demo(a) => commands::demo(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
