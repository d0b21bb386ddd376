//! Telegrapher's system on every edge, coupled at vertices.
//!
//! On an edge with coefficients `p = (L, C, R, G)` the unknowns are the
//! current `u₁` and voltage `u₂`:
//!
//! ```text
//! p₁ ∂ₜu₁ + p₃ u₁ + ∂ₓu₂ = f₁
//! p₂ ∂ₜu₂ + p₄ u₂ + ∂ₓu₁ = f₂
//! ```
//!
//! Interior vertices carry voltage continuity and current balance, exterior
//! vertices a prescribed voltage.

mod coefficients;
mod energy;
mod junction;
mod manufactured;
mod mesh;
mod operator;
mod problem;
mod solver;
mod trace;
mod trajectory;

use thiserror::Error;

use crate::network::{EdgeId, NetworkError};

pub use coefficients::{CoefficientBounds, CoefficientField, EdgeCoefficients};
pub use energy::{energy, energy_bound_report, energy_series, EnergyBoundReport};
pub use junction::{couple_vertex, JunctionState};
pub use manufactured::{manufacture_homogeneous_field, ManufacturedField, ManufacturedOptions};
pub use mesh::{EdgeMesh, GridSpec, Mesh};
pub use operator::{
    apply_operator, apply_operator_sampled, sample_field, AnalyticField, DAlembert, OperatorSource,
};
pub use problem::{
    BoundaryEntry, CompatibilityReport, InitialEntry, ProblemData, ProblemSpec, Source,
};
pub use solver::{solve, Direction, Solution};
pub use trace::{boundary_trace, one_sided_derivatives, BoundaryTraces, LeafTrace};
pub use trajectory::{EdgeSeries, FieldTrajectory};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("edge {edge} has {cells} cells; at least 2 are required")]
    TooFewCells { edge: EdgeId, cells: usize },
    #[error("configuration: {0}")]
    Config(String),
    #[error("CFL number {0} must lie in (0, 1]")]
    CflNumber(f64),
    #[error("CFL violation: dt = {dt:e} exceeds the stable limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("coefficient domain: {0}")]
    Domain(String),
    #[error("a {required}-level stencil is needed but only {found} levels are stored")]
    InsufficientLevels { required: usize, found: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}
