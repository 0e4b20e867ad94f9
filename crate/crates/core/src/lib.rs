//! Dynamics and closed-loop configuration tracking for a multi-segment
//! pneumatic soft robotic arm modeled as a Cosserat rod.
//!
//! The crate is organized around the numerical pipeline:
//!
//! - [`rod`]: domain types, the linear constitutive law, and the spatial
//!   right-hand sides of the rod PDEs after BDF time discretization.
//! - [`bdf`]: the implicit time-discretization coefficients.
//! - [`bvp`]: RK4 spatial sweeps and the shooting solution of the free-end
//!   boundary value problem.
//! - [`actuation`]: chamber-pressure mappings, pneumatic loads, and the
//!   first-order pressure-regulator lag model.
//! - [`pcc`]: constant-curvature kinematics mapping tip poses to
//!   configuration variables and back.
//! - [`controller`]: the inverse-dynamic control law, gain construction,
//!   and the closed-loop error-dynamics / Lyapunov machinery.
//! - [`sim`]: scenario configuration, the end-to-end tracking loop with a
//!   virtual plant, trajectory logging, and RMSE reporting.

pub mod actuation;
pub mod bdf;
pub mod bvp;
pub mod controller;
pub mod error;
pub mod math;
pub mod pcc;
pub mod rod;
pub mod sim;

pub use actuation::{
    equivalent_to_pressures, gravity_load, lag_plant_step, pneumatic_wrench,
    pressures_to_equivalent, wrench_to_equivalent, ChamberPressures, EquivalentActuation,
    LagPlantState, PressureLimits,
};
pub use bdf::{bdf2_coefficients, BdfCoeffs};
pub use bvp::{
    rk4_spatial_step, shooting_solve, sweep_rod, ArmGrid, FnLoad, LoadModel, PerNodeLoads,
    RodSweepResult, ShootingConfig, UniformLoad,
};
pub use controller::{
    assemble_error_dynamics, build_gains, control_wrench, lyapunov_rate, lyapunov_value,
    simulate_error_ode, ErrorDynamics, GainCoefficients, GainSet, ReferenceSample,
    ReferenceSignal,
};
pub use error::{Error, Result};
pub use pcc::{pcc_forward, pcc_to_config, tip_to_pcc, PccConfig, PccMode, TipPose};
pub use rod::{
    closed_form_config, spatial_rhs, stiffness_matrices, ConfigRates, HistoryBuffer,
    HistoryTerms, MaterialParams, NodeState, StiffnessSet, Wrench,
};
pub use sim::{
    load_config, rmse, run_tracking, ScenarioConfig, ScenarioKind, TrackingOutput, TrajectoryLog,
};
