use thiserror::Error;

/// Everything that can go wrong while evaluating, factoring, reducing or
/// integrating a structured pair. Times are reported as `f64` regardless of
/// the working scalar.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DaeError {
    #[error("t = {t} lies outside [{t0}, {tf}]")]
    Domain { t: f64, t0: f64, tf: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("{what} is singular at t = {t}")]
    Singular { what: String, t: f64 },

    #[error("rank changes from {r0} at t = {t0} to {r1} at t = {t1}")]
    RankDrop { t0: f64, r0: usize, t1: f64, r1: usize },

    #[error("numerical rank is ill-posed at t = {t}: singular value {sigma:e} lies in the ambiguity band")]
    IllPosedRank { t: f64, sigma: f64 },

    #[error("inertia changes between t = {t0} and t = {t1}")]
    InertiaChange { t0: f64, t1: f64 },

    #[error("{what} is too ill-conditioned at t = {t} (condition estimate {cond:e})")]
    Conditioning { what: String, t: f64, cond: f64 },

    #[error("structure violated: {what} (residual {residual:e})")]
    Structure { what: String, residual: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("pencil is not regular")]
    Irregular,

    #[error("solution space dimension {d} is odd; a self-adjoint pair needs d = 2p")]
    Parity { d: usize },

    #[error("solution basis is deficient: leading block of E has a kernel of dimension {r}")]
    BasisDeficiency { r: usize },

    #[error("step `{step}` failed: {source}")]
    Stage {
        step: &'static str,
        #[source]
        source: Box<DaeError>,
    },

    #[error("internal consistency check failed: {what} (residual {residual:e})")]
    Consistency { what: String, residual: f64 },

    #[error("implicit midpoint system is singular at t = {t}; refine the grid")]
    StepSize { t: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl DaeError {
    pub(crate) fn at_stage(self, step: &'static str) -> Self {
        DaeError::Stage { step, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, DaeError>;
