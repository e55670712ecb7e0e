//! Solve standard-form linear programs by integrating discontinuous
//! primal-dual saddle-point dynamics, and study how those dynamics behave
//! under disturbances and failing communication links.
//!
//! Module map:
//! - [`lp_model`]: problem data, penalized Lagrangian, KKT residual, perturbed programs.
//! - [`oracle`]: exact solutions by basis enumeration (simplex for larger programs).
//! - [`dynamics`]: the projected flow, velocity intervals, penalty bounds, Euler integration.
//! - [`disturbances`]: time-varying additive disturbance signals.
//! - [`network`]: communication graphs, z-ownership, link-failure schedules, stale-information flow.
//! - [`experiments`]: optimal-control reduction, the no-ISS construction, scenario runner.

pub mod disturbances;
pub mod dynamics;
pub mod experiments;
pub mod linalg;
pub mod lp_model;
pub mod network;
pub mod oracle;

pub use linalg::Matrix;
pub use lp_model::{
    kkt_residual, lagrangian_value, perturbed_program, PerturbationVector, PrimalDualState,
    StandardFormLp, ValidationReport,
};
