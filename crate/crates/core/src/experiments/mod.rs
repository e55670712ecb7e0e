//! Scenario runner, the optimal-control reduction and the no-ISS construction.

mod noiss;
mod optctrl;
mod scenario;

pub use noiss::{iss_counterexample, ray_example, IssCounterexample, RayPoint, CERTIFICATE_LAMBDAS};
pub use optctrl::{
    build_optimal_control_lp, control_cost, extract_controls, five_agent_spec, ownership, rollout,
    OptimalControlSpec, Ownership,
};
pub use scenario::{
    random_start, run_scenario, InitialState, LpSource, OutputConfig, RunMetrics, ScenarioConfig, ScenarioOutcome,
};

use crate::disturbances::DisturbanceError;
use crate::dynamics::DynamicsError;
use crate::lp_model::LpError;
use crate::network::NetworkError;
use crate::oracle::OracleError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Disturbance(#[from] DisturbanceError),
    #[error("feasible set is bounded; no primal ray to push the equilibria along")]
    BoundedFeasibleSet,
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Process exit status for the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Ok = 0,
    InvalidInput = 2,
    Numerical = 3,
    InfeasibleOrUnbounded = 4,
}

impl ExperimentError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        ExperimentError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_kind(&self) -> ExitKind {
        fn dynamics(e: &DynamicsError) -> ExitKind {
            match e {
                DynamicsError::NonFinite { .. } => ExitKind::Numerical,
                _ => ExitKind::InvalidInput,
            }
        }
        match self {
            ExperimentError::Oracle(e) => match e {
                OracleError::Infeasible
                | OracleError::Unbounded
                | OracleError::UnboundedSolutionSet => ExitKind::InfeasibleOrUnbounded,
                OracleError::InvalidLp(_) => ExitKind::InvalidInput,
                OracleError::BudgetExceeded { .. } | OracleError::Numerical(_) => ExitKind::Numerical,
            },
            ExperimentError::Dynamics(e) => dynamics(e),
            ExperimentError::Network(NetworkError::Dynamics(e)) => dynamics(e),
            _ => ExitKind::InvalidInput,
        }
    }
}
