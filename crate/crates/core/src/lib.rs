//! Congruence canonical forms, structured reduction and structure-preserving
//! integration for linear time-varying DAEs `E(t)ẋ = A(t)x + f(t)` whose
//! coefficients are self-adjoint (`Eᵀ = −E`, `Aᵀ = A + Ė`) or skew-adjoint
//! (`Eᵀ = E`, `Aᵀ = −A − Ė`).
//!
//! Everything is generic over the scalar through [`scalar::Real`]; the
//! aliases below fix it to `f64`.

pub mod canonical;
pub mod error;
pub mod factor;
pub mod flow;
pub mod linalg;
pub mod matfun;
pub mod models;
pub mod reduce;
pub mod scalar;
pub mod structure;

pub use error::{DaeError, Result};
pub use matfun::{Interp, Kind};
pub use scalar::Real;
pub use structure::{Adjointness, Tag};

pub type TimeGrid = matfun::TimeGrid<f64>;
pub type MatrixFunction = matfun::MatrixFunction<f64>;
pub type MatrixPair = matfun::MatrixPair<f64>;
pub type CongruenceTransform = structure::CongruenceTransform<f64>;
pub type StructureReport = structure::StructureReport<f64>;
pub type SolutionBasis = canonical::SolutionBasis<f64>;
pub type SelfAdjointGlobalForm = canonical::SelfAdjointGlobalForm<f64>;
pub type SkewAdjointGlobalForm = canonical::SkewAdjointGlobalForm<f64>;
pub type ReducedSystem = reduce::ReducedSystem<f64>;
pub type Certificate = reduce::Certificate<f64>;
pub type Trajectory = flow::Trajectory<f64>;
pub type FlowDiagnostics = flow::FlowDiagnostics<f64>;
pub type PHDAEModel = models::PHDAEModel<f64>;

pub type TimeGrid32 = matfun::TimeGrid<f32>;
pub type MatrixFunction32 = matfun::MatrixFunction<f32>;
pub type MatrixPair32 = matfun::MatrixPair<f32>;
