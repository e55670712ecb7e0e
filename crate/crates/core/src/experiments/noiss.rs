//! Constant disturbances that push the equilibria arbitrarily far away.
//!
//! When the feasible set contains a ray `x̂ + λν`, choosing the perturbed cost
//! `η = Aᵀy + s` (with `s` the indicator of the coordinates off the ray's
//! support) makes every point of the ray optimal: `−y` is a dual certificate
//! whose slack `s` vanishes on the support. The disturbance
//! `w̄ = (c − η, 0)` realizes that cost.

use crate::linalg::{norm2, norm_inf};
use crate::lp_model::{kkt_residual, perturbed_program, PerturbationVector, PrimalDualState, StandardFormLp};
use crate::oracle::{self, min_recession_cost, DEFAULT_BUDGET};
use serde::Serialize;

use super::ExperimentError;

pub const CERTIFICATE_LAMBDAS: [f64; 4] = [0.0, 1.0, 10.0, 100.0];
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayPoint {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub norm: f64,
    pub perturbed_kkt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssCounterexample {
    pub w_bar: PerturbationVector,
    pub x_hat: Vec<f64>,
    pub nu: Vec<f64>,
    pub eta: Vec<f64>,
    /// Oracle dual of the perturbed program.
    pub z_bar: Vec<f64>,
    pub certificate: Vec<RayPoint>,
}

impl IssCounterexample {
    pub fn max_certificate_residual(&self) -> f64 {
        self.certificate
            .iter()
            .map(|p| p.perturbed_kkt)
            .fold(0.0, f64::max)
    }
}

pub fn iss_counterexample(lp: &StandardFormLp) -> Result<IssCounterexample, ExperimentError> {
    lp.ensure_valid()?;
    let (n, m) = (lp.n(), lp.m());
    let feasibility = StandardFormLp {
        c: vec![0.0; n],
        ..lp.clone()
    };
    let x_hat = oracle::solve(&feasibility)?.x_star;
    let (_, direction) =
        min_recession_cost(&feasibility, DEFAULT_BUDGET)?.ok_or(ExperimentError::BoundedFeasibleSet)?;
    let len = norm2(&direction);
    let nu: Vec<f64> = direction.iter().map(|d| d / len).collect();

    let off_support: Vec<f64> = x_hat
        .iter()
        .zip(&nu)
        .map(|(&x, &d)| if x > SUPPORT_TOL || d > SUPPORT_TOL { 0.0 } else { 1.0 })
        .collect();
    let eta_for = |y: &[f64]| -> Vec<f64> {
        lp.a.tr_mul_vec(y)
            .iter()
            .zip(&off_support)
            .map(|(a, s)| a + s)
            .collect()
    };
    let mut eta = eta_for(&vec![1.0; m]);
    for l in 0..m {
        if norm_inf(&eta) > SUPPORT_TOL {
            break;
        }
        let mut y = vec![0.0; m];
        y[l] = 1.0;
        eta = eta_for(&y);
    }

    let w_bar = PerturbationVector::new(
        lp.c.iter().zip(&eta).map(|(c, e)| c - e).collect(),
        vec![0.0; m],
    );
    let perturbed = perturbed_program(lp, &w_bar);
    let z_bar = oracle::solve(&perturbed)?.z_star;
    let certificate = CERTIFICATE_LAMBDAS
        .iter()
        .map(|&lambda| {
            let x: Vec<f64> = x_hat.iter().zip(&nu).map(|(x, d)| x + lambda * d).collect();
            let perturbed_kkt = kkt_residual(&perturbed, &PrimalDualState::new(x.clone(), z_bar.clone()));
            RayPoint {
                lambda,
                norm: norm2(&x),
                x,
                perturbed_kkt,
            }
        })
        .collect();
    Ok(IssCounterexample {
        w_bar,
        x_hat,
        nu,
        eta,
        z_bar,
        certificate,
    })
}

/// `min x₁ s.t. x₁ − x₂ = 0, x ≥ 0`: a feasible ray along `(1, 1)`.
pub fn ray_example() -> StandardFormLp {
    StandardFormLp::new("ray", vec![vec![1.0, -1.0]], vec![0.0], vec![1.0, 0.0]).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_model::lp1;

    #[test]
    fn ray_example_construction() {
        let ce = iss_counterexample(&ray_example()).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((ce.nu[0] - r).abs() < 1e-15 && (ce.nu[1] - r).abs() < 1e-15);
        assert_eq!(ce.x_hat, vec![0.0, 0.0]);
        assert_eq!(ce.eta, vec![1.0, -1.0]);
        assert_eq!(ce.w_bar.w_x, vec![0.0, 1.0]);
        assert_eq!(ce.w_bar.w_z, vec![0.0]);
        for p in &ce.certificate {
            assert!(p.perturbed_kkt <= 1e-9, "{p:?}");
        }
        assert!((ce.certificate[3].norm - 100.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_feasible_set_is_reported() {
        assert!(matches!(
            iss_counterexample(&lp1()),
            Err(ExperimentError::BoundedFeasibleSet)
        ));
    }

    #[test]
    fn larger_ray_instance() {
        // x₁ + x₂ − x₃ = 1 with a ray along (1, 0, 1) and (0, 1, 1)
        let lp = StandardFormLp::new("", vec![vec![1.0, 1.0, -1.0]], vec![1.0], vec![2.0, 1.0, 0.5]).unwrap();
        let ce = iss_counterexample(&lp).unwrap();
        assert!(ce.w_bar.w_z.iter().all(|&v| v == 0.0));
        assert!(ce.max_certificate_residual() <= 1e-9);
        let dot: f64 = ce.eta.iter().zip(&ce.nu).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }
}
