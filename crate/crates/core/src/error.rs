//! Error types shared across the solver and simulation layers.

use thiserror::Error;

/// Errors produced by the rod model, BVP solver, and tracking loop.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A time or spatial step size was zero or negative.
    #[error("invalid step size: {0} (must be > 0)")]
    InvalidStep(f64),

    /// Material or scenario parameters violate their invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A constitutive matrix could not be inverted.
    #[error("singular constitutive matrix ({0})")]
    ConstitutiveSingularity(&'static str),

    /// A spatial sweep produced a non-finite state.
    #[error("rod sweep diverged at node {node} (non-finite state)")]
    SweepDiverged { node: usize },

    /// The shooting method ran out of iterations.
    #[error("shooting did not converge after {iterations} iterations (best normalized residual {best_residual:.3e})")]
    ShootingNonConvergence {
        iterations: usize,
        best_residual: f64,
    },

    /// A controller gain coefficient was not strictly positive.
    #[error("invalid gain: {0}")]
    InvalidGain(String),

    /// Hadamard division by a zero inertia-gain diagonal entry.
    #[error("zero diagonal in K_m while assembling error dynamics")]
    ZeroInertiaGain,

    /// Tip pose outside the planar branches handled by the PCC mapping.
    #[error("tip pose (x={x:.3e}, y={y:.3e}) lies outside the planar PCC branches")]
    OutOfBranch { x: f64, y: f64 },

    /// An empty sample series was passed to a reduction.
    #[error("empty series")]
    EmptySeries,
}

pub type Result<T> = std::result::Result<T, Error>;
