//! Standard-form linear programs, the penalized Lagrangian, optimality
//! residuals and the constant-disturbance perturbed program.
//!
//! The primal is `min cᵀx s.t. Ax = b, x ≥ 0`; its dual is taken with the
//! sign convention `max −bᵀz s.t. Aᵀz + c ≥ 0`, so that a primal-dual
//! optimal pair satisfies `cᵀx = −bᵀz`.

use crate::linalg::{dot, norm_inf, Matrix, RaggedRows};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// `min cᵀx s.t. Ax = b, x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardFormLp {
    #[serde(default)]
    pub name: String,
    #[serde(rename = "A")]
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error(transparent)]
    Ragged(#[from] RaggedRows),
    #[error("invalid LP: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed LP JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl StandardFormLp {
    pub fn new(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self, LpError> {
        Ok(StandardFormLp {
            name: name.into(),
            a: Matrix::from_rows(a)?,
            b,
            c,
        })
    }

    /// Like [`StandardFormLp::new`], but also rejects anything `validate_lp` flags.
    pub fn checked(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self, LpError> {
        let lp = Self::new(name, a, b, c)?;
        lp.ensure_valid()?;
        Ok(lp)
    }

    /// Number of primal variables.
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Number of equality constraints (dual variables).
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn ensure_valid(&self) -> Result<(), LpError> {
        let report = validate_lp(self);
        if report.ok {
            Ok(())
        } else {
            Err(LpError::Invalid(report.errors().collect::<Vec<_>>().join("; ")))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, LpError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, LpError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// `Ax − b`.
    pub fn primal_residual(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .mul_vec(x)
            .into_iter()
            .zip(&self.b)
            .map(|(ax, b)| ax - b)
            .collect()
    }

    /// `Aᵀz + c`, the dual slack.
    pub fn dual_slack(&self, z: &[f64]) -> Vec<f64> {
        self.a
            .tr_mul_vec(z)
            .into_iter()
            .zip(&self.c)
            .map(|(az, c)| az + c)
            .collect()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }
}

/// A primal-dual point `(x, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl PrimalDualState {
    pub fn new(x: Vec<f64>, z: Vec<f64>) -> Self {
        PrimalDualState { x, z }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        PrimalDualState {
            x: vec![0.0; n],
            z: vec![0.0; m],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.z).all(|v| v.is_finite())
    }

    /// Euclidean distance in the stacked `(x, z)` space.
    pub fn distance(&self, other: &PrimalDualState) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.z.iter().zip(&other.z))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A constant additive disturbance `w̄ = (w̄_x, w̄_z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationVector {
    pub w_x: Vec<f64>,
    pub w_z: Vec<f64>,
}

impl PerturbationVector {
    pub fn zeros(n: usize, m: usize) -> Self {
        PerturbationVector {
            w_x: vec![0.0; n],
            w_z: vec![0.0; m],
        }
    }

    pub fn new(w_x: Vec<f64>, w_z: Vec<f64>) -> Self {
        PerturbationVector { w_x, w_z }
    }

    pub fn norm2(&self) -> f64 {
        self.w_x
            .iter()
            .chain(&self.w_z)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.w_x.iter().chain(&self.w_z).all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

/// Outcome of a structural check. `ok` is false iff some message is an error.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub messages: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn new() -> Self {
        ValidationReport {
            ok: true,
            messages: Vec::new(),
        }
    }

    pub fn push(&mut self, severity: Severity, message: impl Into<String>) {
        if severity == Severity::Error {
            self.ok = false;
        }
        self.messages.push(Diagnostic {
            severity,
            message: message.into(),
        });
    }

    pub fn error(&mut self, message: impl Into<String>) {
        self.push(Severity::Error, message);
    }

    pub fn info(&mut self, message: impl Into<String>) {
        self.push(Severity::Info, message);
    }

    pub fn errors(&self) -> impl Iterator<Item = &str> {
        self.messages
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message.as_str())
    }

    pub fn has_message(&self, needle: &str) -> bool {
        self.messages.iter().any(|d| d.message.contains(needle))
    }
}

/// Reports dimension mismatches, all-zero constraint rows and non-finite data.
pub fn validate_lp(lp: &StandardFormLp) -> ValidationReport {
    let mut report = ValidationReport::new();
    let (rows, cols) = (lp.a.rows(), lp.a.cols());
    if rows != lp.b.len() {
        report.error(format!(
            "dimension mismatch: A has {rows} rows but b has length {}",
            lp.b.len()
        ));
    }
    if cols != lp.c.len() {
        report.error(format!(
            "dimension mismatch: A has {cols} columns but c has length {}",
            lp.c.len()
        ));
    }
    if cols == 0 {
        report.error("problem has no variables");
    }
    for i in 0..rows {
        if lp.a.row(i).iter().all(|&v| v == 0.0) {
            report.error(format!("zero row: constraint {} has no nonzero coefficient", i + 1));
        }
    }
    if !lp.a.iter().all(|v| v.is_finite()) {
        report.error("non-finite entry in A");
    }
    if !lp.b.iter().all(|v| v.is_finite()) {
        report.error("non-finite entry in b");
    }
    if !lp.c.iter().all(|v| v.is_finite()) {
        report.error("non-finite entry in c");
    }
    report
}

/// The dual program in max form:
/// `max objectiveᵀz s.t. constraint_matrix·z + offset ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualProgram {
    /// Coefficients of the maximized objective, `−b`.
    pub objective: Vec<f64>,
    /// `Aᵀ`, one row per primal variable.
    pub constraint_matrix: Matrix,
    /// `c`.
    pub offset: Vec<f64>,
}

impl DualProgram {
    /// Recovers the primal data by transposing back.
    pub fn primal(&self, name: impl Into<String>) -> StandardFormLp {
        StandardFormLp {
            name: name.into(),
            a: self.constraint_matrix.transpose(),
            b: self.objective.iter().map(|v| -v).collect(),
            c: self.offset.clone(),
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        dot(&self.objective, z)
    }

    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        self.constraint_matrix
            .mul_vec(z)
            .iter()
            .zip(&self.offset)
            .all(|(az, c)| az + c >= -tol)
    }
}

pub fn dual_of(lp: &StandardFormLp) -> DualProgram {
    DualProgram {
        objective: lp.b.iter().map(|v| -v).collect(),
        constraint_matrix: lp.a.transpose(),
        offset: lp.c.clone(),
    }
}

/// `L^K(x, z) = cᵀx + ½‖Ax − b‖² + zᵀ(Ax − b) + K·Σ max{0, −xᵢ}`.
pub fn lagrangian_value(lp: &StandardFormLp, k: f64, s: &PrimalDualState) -> f64 {
    let r = lp.primal_residual(&s.x);
    let penalty: f64 = s.x.iter().map(|&xi| (-xi).max(0.0)).sum();
    lp.objective(&s.x) + 0.5 * dot(&r, &r) + dot(&s.z, &r) + k * penalty
}

/// Largest violation among primal feasibility, nonnegativity, dual
/// feasibility, complementary slackness and strong duality.
pub fn kkt_residual(lp: &StandardFormLp, s: &PrimalDualState) -> f64 {
    let parts = KktParts::evaluate(lp, s);
    parts.max()
}

/// The five terms aggregated by [`kkt_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktParts {
    pub primal_infeasibility: f64,
    pub negativity: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
}

impl KktParts {
    pub fn evaluate(lp: &StandardFormLp, s: &PrimalDualState) -> Self {
        let slack = lp.dual_slack(&s.z);
        KktParts {
            primal_infeasibility: norm_inf(&lp.primal_residual(&s.x)),
            negativity: s.x.iter().fold(0.0, |m, &v| m.max((-v).max(0.0))),
            dual_infeasibility: slack.iter().fold(0.0, |m, &v| m.max((-v).max(0.0))),
            complementarity: dot(&slack, &s.x).abs(),
            duality_gap: (lp.objective(&s.x) + dot(&lp.b, &s.z)).abs(),
        }
    }

    pub fn max(&self) -> f64 {
        [
            self.primal_infeasibility,
            self.negativity,
            self.dual_infeasibility,
            self.complementarity,
            self.duality_gap,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// The program whose undisturbed equilibria are the equilibria of the
/// dynamics under the constant disturbance `w̄`:
/// cost `c − w̄_x − Aᵀw̄_z`, right-hand side `b − w̄_z`.
pub fn perturbed_program(lp: &StandardFormLp, w: &PerturbationVector) -> StandardFormLp {
    if w.is_zero() {
        return lp.clone();
    }
    let atw = lp.a.tr_mul_vec(&w.w_z);
    StandardFormLp {
        name: format!("{} (perturbed)", lp.name),
        a: lp.a.clone(),
        b: lp.b.iter().zip(&w.w_z).map(|(b, wz)| b - wz).collect(),
        c: lp
            .c
            .iter()
            .zip(&w.w_x)
            .zip(&atw)
            .map(|((c, wx), aw)| c - wx - aw)
            .collect(),
    }
}

/// `min x₁ + 2x₂ s.t. x₁ + x₂ = 1, x ≥ 0`, the running small example.
pub fn lp1() -> StandardFormLp {
    StandardFormLp::new("LP-1", vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 2.0])
        .expect("LP-1 is rectangular")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: &[f64], z: &[f64]) -> PrimalDualState {
        PrimalDualState::new(x.to_vec(), z.to_vec())
    }

    #[test]
    fn validate_accepts_lp1() {
        let r = validate_lp(&lp1());
        assert!(r.ok, "{r:?}");
    }

    #[test]
    fn validate_flags_zero_row() {
        let lp = StandardFormLp::new("", vec![vec![0.0, 0.0]], vec![1.0], vec![0.0, 0.0]).unwrap();
        let r = validate_lp(&lp);
        assert!(!r.ok);
        assert!(r.has_message("zero row"));
    }

    #[test]
    fn validate_flags_dimension_mismatch() {
        let lp = StandardFormLp::new("", vec![vec![1.0, 1.0]], vec![1.0, 2.0], vec![0.0, 0.0])
            .unwrap();
        let r = validate_lp(&lp);
        assert!(!r.ok);
        assert!(r.has_message("dimension mismatch"));
    }

    #[test]
    fn validate_flags_non_finite() {
        let lp = StandardFormLp::new("", vec![vec![1.0, f64::NAN]], vec![1.0], vec![0.0, 0.0])
            .unwrap();
        assert!(!validate_lp(&lp).ok);
    }

    #[test]
    fn json_loader_rejects_ragged_matrix() {
        let err = StandardFormLp::from_json_str(r#"{"name":"x","A":[[1,2],[3]],"b":[1,2],"c":[0,0]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("non-rectangular"), "{err}");
        let lp = StandardFormLp::from_json_str(r#"{"name":"LP-1","A":[[1,1]],"b":[1],"c":[1,2]}"#)
            .unwrap();
        assert_eq!(lp, lp1());
    }

    #[test]
    fn dual_of_lp1() {
        let d = dual_of(&lp1());
        assert_eq!(d.objective, vec![-1.0]);
        assert_eq!(d.constraint_matrix.to_rows(), vec![vec![1.0], vec![1.0]]);
        assert_eq!(d.offset, vec![1.0, 2.0]);
        // z + 1 ≥ 0 and z + 2 ≥ 0
        assert!(d.is_feasible(&[-1.0], 0.0));
        assert!(!d.is_feasible(&[-1.5], 0.0));
    }

    #[test]
    fn dual_of_identity_program() {
        let lp = StandardFormLp::new(
            "",
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let d = dual_of(&lp);
        assert_eq!(d.objective, vec![-1.0, -1.0]);
        assert_eq!(d.value(&[2.0, 3.0]), -5.0);
        assert!(d.is_feasible(&[0.0, 0.0], 0.0));
        assert!(!d.is_feasible(&[-0.1, 0.0], 0.0));
    }

    #[test]
    fn dual_round_trip() {
        let lp = lp1();
        assert_eq!(dual_of(&lp).primal("LP-1"), lp);
    }

    #[test]
    fn lagrangian_examples() {
        let lp = lp1();
        assert_eq!(lagrangian_value(&lp, 5.0, &st(&[1.0, 0.0], &[-1.0])), 1.0);
        assert_eq!(lagrangian_value(&lp, 5.0, &st(&[0.0, 0.0], &[0.0])), 0.5);
        // feasible x, K = 0: value is cᵀx whatever z is
        for z in [-3.0, 0.0, 7.5] {
            assert_eq!(lagrangian_value(&lp, 0.0, &st(&[0.25, 0.75], &[z])), 1.75);
        }
        // exact penalty on negative entries
        assert_eq!(lagrangian_value(&lp, 2.0, &st(&[2.0, -1.0], &[0.0])), 2.0);
    }

    #[test]
    fn kkt_examples() {
        let lp = lp1();
        assert_eq!(kkt_residual(&lp, &st(&[1.0, 0.0], &[-1.0])), 0.0);
        assert_eq!(kkt_residual(&lp, &st(&[0.0, 0.0], &[0.0])), 1.0);
        // dual infeasible z = −1.5 ⇒ slack (−0.5, 0.5)
        let parts = KktParts::evaluate(&lp, &st(&[1.0, 0.0], &[-1.5]));
        assert_eq!(parts.dual_infeasibility, 0.5);
        assert_eq!(parts.complementarity, 0.5);
        assert_eq!(parts.duality_gap, 0.5);
    }

    #[test]
    fn perturbed_examples() {
        let lp = lp1();
        let p = perturbed_program(&lp, &PerturbationVector::new(vec![0.0, 0.0], vec![0.5]));
        assert_eq!(p.c, vec![0.5, 1.5]);
        assert_eq!(p.b, vec![0.5]);
        let p = perturbed_program(&lp, &PerturbationVector::new(vec![1.0, 0.0], vec![0.0]));
        assert_eq!(p.c, vec![0.0, 2.0]);
        assert_eq!(p.b, vec![1.0]);
        assert_eq!(p.a, lp.a);
        assert_eq!(perturbed_program(&lp, &PerturbationVector::zeros(2, 1)), lp);
    }
}
