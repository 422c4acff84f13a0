//! Numerical laboratory for a coupled nonlinear Schrödinger system with
//! quadratic interaction under full or partial harmonic confinement.
//!
//! The crate computes normalized ground states of the stationary system
//!
//! ```text
//!   -Δu + V(x) u - u v   = λ₁ u
//!   -κΔv + V(x) v - u²/2 = λ₂ v
//! ```
//!
//! on periodic/cylindrical grids, verifies the variational identities the
//! states satisfy (Pohozaev, Gagliardo–Nirenberg, multiplier formulas), and
//! integrates the time-dependent system with a Strang splitting whose linear
//! flow is exact in the oscillator eigenbasis.

pub mod dynamics;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod groundstate;
pub mod linalg;
pub mod oscillator;
pub mod reduced1d;
pub mod snapshot;
pub mod spectral;
pub mod spectral_basis;

pub use field::FieldPair;
pub use functionals::{FunctionalReport, ModelParams, Potential};
pub use grid::{AxisKind, AxisSpec, Geometry, GridSpec};
pub use groundstate::{
    ConstraintKind, ConstraintSpec, GroundStateResult, Initializer, SolverConfig,
};
pub use oscillator::OscillatorBasis;

use thiserror::Error;

/// Crate level error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid point budget exceeded: {total} > {budget}")]
    BudgetExceeded { total: usize, budget: usize },
    #[error("periodic axis count {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("field shape {found} does not match grid shape {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite sample encountered in {0}")]
    NonFinite(&'static str),
    #[error("eigensolver failed to converge (mode {mode}, residual {residual:.3e})")]
    EigenNoConvergence { mode: usize, residual: f64 },
    #[error("transverse grid under-resolved: ground mode boundary amplitude {0:.3e}")]
    UnderResolved(f64),
    #[error("infeasible ball cap: mu1 + mu2 = {mass:.6e} exceeds chi/(eps0*l0) = {limit:.6e}")]
    InfeasibleCap { mass: f64, limit: f64 },
    #[error("zero component under product constraint")]
    ZeroComponent,
    #[error("interaction term K = {0:.6e} is not positive")]
    NonPositiveK(f64),
    #[error("{op} requires kappa = 1/2, got {kappa}")]
    KappaRestriction { op: &'static str, kappa: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("solver aborted: {0}")]
    SolverAbort(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
