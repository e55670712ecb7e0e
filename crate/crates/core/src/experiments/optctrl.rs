//! Finite-horizon optimal control as a standard-form LP.
//!
//! The problem `min Σ_τ ‖x(τ+1)‖₁ + ‖u(τ)‖₁` subject to
//! `x(τ+1) = G x(τ) + H u(τ)` is split into positive and negative parts so
//! every variable is nonnegative. Agent `i` owns the four blocks
//! `(x⁺_i(τ+1), x⁻_i(τ+1), u⁺_i(τ), u⁻_i(τ))` for every `τ`, stored
//! contiguously, and the row for `(i, τ)` encodes agent `i`'s state update.

use crate::linalg::Matrix;
use crate::lp_model::StandardFormLp;
use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalControlSpec {
    #[serde(rename = "G")]
    pub g: Matrix,
    #[serde(rename = "H_diag")]
    pub h_diag: Vec<f64>,
    pub x0: Vec<f64>,
    #[serde(rename = "T")]
    pub horizon: usize,
}

const BLOCKS: usize = 4;

impl OptimalControlSpec {
    pub fn agents(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let n = self.agents();
        if n == 0 {
            return Err(ExperimentError::Invalid("x0 is empty".into()));
        }
        if self.g.rows() != n || self.g.cols() != n {
            return Err(ExperimentError::Invalid(format!(
                "G is {}x{}, expected {n}x{n}",
                self.g.rows(),
                self.g.cols()
            )));
        }
        if self.h_diag.len() != n {
            return Err(ExperimentError::Invalid(format!(
                "H_diag has length {}, expected {n}",
                self.h_diag.len()
            )));
        }
        let finite = self.g.iter().chain(&self.h_diag).chain(&self.x0).all(|v| v.is_finite());
        if !finite {
            return Err(ExperimentError::Invalid("non-finite entry in spec".into()));
        }
        Ok(())
    }

    /// Column of block `block` (0 = x⁺, 1 = x⁻, 2 = u⁺, 3 = u⁻) of agent `i` at step `tau`.
    pub fn column(&self, agent: usize, tau: usize, block: usize) -> usize {
        (agent * (self.horizon + 1) + tau) * BLOCKS + block
    }

    pub fn row(&self, agent: usize, tau: usize) -> usize {
        agent * (self.horizon + 1) + tau
    }
}

pub fn build_optimal_control_lp(spec: &OptimalControlSpec) -> Result<StandardFormLp, ExperimentError> {
    spec.validate()?;
    let big_n = spec.agents();
    let steps = spec.horizon + 1;
    let (n, m) = (BLOCKS * big_n * steps, big_n * steps);
    let mut a = Matrix::zeros(m, n);
    let mut b = vec![0.0; m];
    let gx0 = spec.g.mul_vec(&spec.x0);
    for i in 0..big_n {
        for tau in 0..steps {
            let r = spec.row(i, tau);
            let row = a.row_mut(r);
            row[spec.column(i, tau, 0)] = 1.0;
            row[spec.column(i, tau, 1)] = -1.0;
            let h = spec.h_diag[i];
            if h != 0.0 {
                row[spec.column(i, tau, 2)] = -h;
                row[spec.column(i, tau, 3)] = h;
            }
            if tau == 0 {
                b[r] = gx0[i];
            } else {
                for j in 0..big_n {
                    let gij = spec.g[(i, j)];
                    if gij != 0.0 {
                        row[spec.column(j, tau - 1, 0)] -= gij;
                        row[spec.column(j, tau - 1, 1)] += gij;
                    }
                }
            }
        }
    }
    StandardFormLp::new(
        format!("optimal-control N={big_n} T={}", spec.horizon),
        a.to_rows(),
        b,
        vec![1.0; n],
    )
    .map_err(ExperimentError::from)
}

/// `u(τ) = u⁺(τ) − u⁻(τ)` for `τ = 0..=T`, one vector of length `N` per step.
pub fn extract_controls(x: &[f64], spec: &OptimalControlSpec) -> Vec<Vec<f64>> {
    (0..=spec.horizon)
        .map(|tau| {
            (0..spec.agents())
                .map(|i| x[spec.column(i, tau, 2)] - x[spec.column(i, tau, 3)])
                .collect()
        })
        .collect()
}

/// States `x(1), …, x(T+1)` from `x(τ+1) = G x(τ) + H u(τ)`.
pub fn rollout(spec: &OptimalControlSpec, controls: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ExperimentError> {
    if controls.len() != spec.horizon + 1 {
        return Err(ExperimentError::Invalid(format!(
            "expected {} control vectors, got {}",
            spec.horizon + 1,
            controls.len()
        )));
    }
    let mut x = spec.x0.clone();
    let mut out = Vec::with_capacity(controls.len());
    for u in controls {
        if u.len() != spec.agents() {
            return Err(ExperimentError::Invalid("control vector has wrong length".into()));
        }
        let gx = spec.g.mul_vec(&x);
        x = gx
            .iter()
            .zip(&spec.h_diag)
            .zip(u)
            .map(|((g, h), ui)| g + h * ui)
            .collect();
        out.push(x.clone());
    }
    Ok(out)
}

/// `Σ_τ ‖x(τ+1)‖₁ + ‖u(τ)‖₁`.
pub fn control_cost(states: &[Vec<f64>], controls: &[Vec<f64>]) -> f64 {
    states
        .iter()
        .chain(controls)
        .flat_map(|v| v.iter())
        .map(|v| v.abs())
        .sum()
}

/// How the LP's variables are split among the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Ownership {
    pub agents: usize,
    pub n: usize,
    pub m: usize,
    /// All variables an agent updates (state and control parts).
    pub variables_per_agent: usize,
    /// Control parts `u⁺, u⁻` an agent is responsible for.
    pub control_variables_per_agent: usize,
    /// Variables each agent would hold if every agent kept a copy of all controls.
    pub consensus_copy_size: usize,
}

pub fn ownership(spec: &OptimalControlSpec) -> Ownership {
    let (big_n, steps) = (spec.agents(), spec.horizon + 1);
    Ownership {
        agents: big_n,
        n: BLOCKS * big_n * steps,
        m: big_n * steps,
        variables_per_agent: BLOCKS * steps,
        control_variables_per_agent: 2 * steps,
        consensus_copy_size: 2 * big_n * steps,
    }
}

/// A five-agent chain: open-loop unstable, every agent actuated, horizon 11.
pub fn five_agent_spec() -> OptimalControlSpec {
    let g = Matrix::from_rows(vec![
        vec![1.1, 0.2, 0.0, 0.0, 0.0],
        vec![0.1, 0.9, 0.2, 0.0, 0.0],
        vec![0.0, 0.1, 1.05, 0.1, 0.0],
        vec![0.0, 0.0, 0.2, 0.8, 0.1],
        vec![0.0, 0.0, 0.0, 0.1, 1.2],
    ])
    .expect("rectangular");
    OptimalControlSpec {
        g,
        h_diag: vec![1.0, 0.5, 1.0, 0.5, 1.0],
        x0: vec![1.0, -1.0, 0.5, 2.0, -0.5],
        horizon: 11,
    }
}
