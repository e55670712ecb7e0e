//! Discontinuous saddle-point dynamics and their explicit Euler integration.
//!
//! With `f(x, z) = −c − Aᵀ(z + Ax − b)` the flow is
//!
//! ```text
//! ẋᵢ = fᵢ + w_xᵢ                 if xᵢ > 0
//! ẋᵢ = max{0, fᵢ + w_xᵢ}         if xᵢ = 0
//! ż  = Ax − b + w_z
//! ```
//!
//! and needs no penalty constant. The penalty machinery ([`KParameters`],
//! [`saddle_velocity_interval`]) only exists to check that discrete
//! trajectories stay inside the set-valued saddle-point flow.

use crate::disturbances::DisturbanceSignal;
use crate::linalg::dot;
use crate::lp_model::{kkt_residual, PerturbationVector, PrimalDualState, StandardFormLp};
use crate::oracle::{compute_k_star, OracleError, OracleSolution};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Entries below this are reported as a negative primal state.
pub const NEGATIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("x[{index}] = {value:e} is negative")]
    NegativePrimal { index: usize, value: f64 },
    #[error("state became non-finite at t = {time} (step size too large?)")]
    NonFinite { time: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `Ax − b` and `z + Ax − b`, shared by the nominal and stale-information flows.
pub(crate) fn constraint_residual(lp: &StandardFormLp, x: &[f64]) -> Vec<f64> {
    (0..lp.m()).map(|l| dot(lp.a.row(l), x) - lp.b[l]).collect()
}

/// `−c − Aᵀ(z + Ax − b)`.
pub fn nominal_flow(lp: &StandardFormLp, s: &PrimalDualState) -> Vec<f64> {
    let r = constraint_residual(lp, &s.x);
    let q: Vec<f64> = s.z.iter().zip(&r).map(|(z, r)| z + r).collect();
    let atq = lp.a.tr_mul_vec(&q);
    lp.c.iter().zip(&atq).map(|(c, v)| -c - v).collect()
}

/// Velocity of the projected flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl Velocity {
    pub fn is_zero(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&v| v == 0.0)
    }

    pub fn norm2(&self) -> f64 {
        self.x.iter().chain(&self.z).map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub(crate) fn project(xi: f64, v: f64) -> f64 {
    if xi > 0.0 {
        v
    } else {
        v.max(0.0)
    }
}

fn check_nonnegative(x: &[f64]) -> Result<(), DynamicsError> {
    match x.iter().position(|&v| v < -NEGATIVE_TOL) {
        Some(index) => Err(DynamicsError::NegativePrimal {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

/// Right-hand side of the disturbed projected dynamics.
pub fn projected_velocity(
    lp: &StandardFormLp,
    s: &PrimalDualState,
    w: &PerturbationVector,
) -> Result<Velocity, DynamicsError> {
    check_nonnegative(&s.x)?;
    let f = nominal_flow(lp, s);
    let x = s
        .x
        .iter()
        .zip(&f)
        .zip(&w.w_x)
        .map(|((&xi, fi), wi)| project(xi, fi + wi))
        .collect();
    let z = constraint_residual(lp, &s.x)
        .into_iter()
        .zip(&w.w_z)
        .map(|(r, wz)| r + wz)
        .collect();
    Ok(Velocity { x, z })
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

/// Componentwise range of the set-valued saddle-point flow of `L^K` at `s`.
///
/// The first `n` entries are the x-components: `{fᵢ}` if `xᵢ > 0`,
/// `[fᵢ, fᵢ + K]` if `xᵢ = 0`, `{fᵢ + K}` if `xᵢ < 0`. The last `m` are `{(Ax − b)ₗ}`.
pub fn saddle_velocity_interval(
    lp: &StandardFormLp,
    k: f64,
    s: &PrimalDualState,
) -> Vec<Interval> {
    let f = nominal_flow(lp, s);
    let mut out: Vec<Interval> = s
        .x
        .iter()
        .zip(&f)
        .map(|(&xi, &fi)| {
            if xi > 0.0 {
                Interval::point(fi)
            } else if xi == 0.0 {
                Interval { lo: fi, hi: fi + k }
            } else {
                Interval::point(fi + k)
            }
        })
        .collect();
    out.extend(constraint_residual(lp, &s.x).into_iter().map(Interval::point));
    out
}

/// `max_i max_{V ≤ ρ} |fᵢ|`, computed exactly: `fᵢ` is affine with gradient
/// `Jᵢ = (−(AᵀA)ᵢ, −(Aᵀ)ᵢ)`, so over the ball of radius `√(2ρ)` its largest
/// magnitude is `|fᵢ(center)| + ‖Jᵢ‖₂·√(2ρ)`.
pub fn compute_k1(lp: &StandardFormLp, center: &PrimalDualState, rho: f64) -> f64 {
    let f = nominal_flow(lp, center);
    let ata = lp.a.transpose().mul(&lp.a);
    let radius = (2.0 * rho.max(0.0)).sqrt();
    (0..lp.n())
        .map(|i| {
            let gram: f64 = ata.row(i).iter().map(|v| v * v).sum();
            let col: f64 = (0..lp.m()).map(|l| lp.a[(l, i)].powi(2)).sum();
            f[i].abs() + (gram + col).sqrt() * radius
        })
        .fold(0.0, f64::max)
}

/// `V = ½‖x − x*‖² + ½‖z − z*‖²`.
pub fn lyapunov_value(s: &PrimalDualState, star: &PrimalDualState) -> f64 {
    let sq: f64 = s
        .x
        .iter()
        .zip(&star.x)
        .chain(s.z.iter().zip(&star.z))
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * sq
}

/// Penalty constants: `k1` bounds the nominal flow on the sublevel set,
/// `k_star` bounds the dual slack on the solution set; `k` is their max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KParameters {
    pub k1: f64,
    pub k_star: f64,
    pub k: f64,
}

impl KParameters {
    pub fn new(k1: f64, k_star: f64) -> Self {
        KParameters {
            k1,
            k_star,
            k: k1.max(k_star),
        }
    }

    /// Both bounds for trajectories starting at `s0`, with `ρ = V(s0, star)`.
    pub fn for_start(
        lp: &StandardFormLp,
        sol: &OracleSolution,
        s0: &PrimalDualState,
    ) -> Result<Self, OracleError> {
        let star = sol.state();
        let rho = lyapunov_value(s0, &star);
        let k1 = compute_k1(lp, &star, rho);
        let k_star = compute_k_star(lp, sol, rho)?;
        Ok(KParameters::new(k1, k_star))
    }
}

/// One explicit Euler step with the projection applied to the result:
/// `x′ = max{0, x + dt·(f + w_x)}`, `z′ = z + dt·(Ax − b + w_z)`.
pub fn step(
    lp: &StandardFormLp,
    s: &PrimalDualState,
    dt: f64,
    w: &PerturbationVector,
) -> PrimalDualState {
    let f = nominal_flow(lp, s);
    let r = constraint_residual(lp, &s.x);
    euler_update(s, &f, &r, dt, w)
}

pub(crate) fn euler_update(
    s: &PrimalDualState,
    fx: &[f64],
    fz: &[f64],
    dt: f64,
    w: &PerturbationVector,
) -> PrimalDualState {
    let x = s
        .x
        .iter()
        .zip(fx)
        .zip(&w.w_x)
        .map(|((xi, fi), wi)| (xi + dt * (fi + wi)).max(0.0))
        .collect();
    let z = s
        .z
        .iter()
        .zip(fz)
        .zip(&w.w_z)
        .map(|((zl, rl), wl)| zl + dt * (rl + wl))
        .collect();
    PrimalDualState { x, z }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Step size in seconds.
    pub dt: f64,
    /// Horizon in seconds.
    pub t_max: f64,
    /// Stop once the KKT residual is at or below this value.
    pub stop_tol: f64,
    /// Record every this many steps (the first and last states are always kept).
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.01,
            t_max: 100.0,
            stop_tol: 1e-6,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(DynamicsError::InvalidConfig(format!(
                "dt must lie in (0, 0.1], got {}",
                self.dt
            )));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(DynamicsError::InvalidConfig(format!(
                "stop_tol must be nonnegative, got {}",
                self.stop_tol
            )));
        }
        if self.record_every == 0 {
            return Err(DynamicsError::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps that covers `[0, t_max]`.
    pub fn max_steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil() as usize
    }
}

/// Recorded run of the dynamics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PrimalDualState>,
    /// `V` against the configured center, when one was given.
    pub lyapunov: Option<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub disturbance_log: Vec<PerturbationVector>,
    /// Euler steps taken.
    pub steps: usize,
    /// First time the residual reached `stop_tol`.
    pub time_to_tol: Option<f64>,
}

impl Trajectory {
    pub fn terminal(&self) -> &PrimalDualState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn terminal_residual(&self) -> f64 {
        *self.residuals.last().expect("nonempty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Writes `t,x_1..x_n,z_1..z_m,V,kkt` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (n, m) = self
            .states
            .first()
            .map_or((0, 0), |s| (s.x.len(), s.z.len()));
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|l| format!("z_{l}")));
        header.push("V".into());
        header.push("kkt".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, s) in self.states.iter().enumerate() {
            let mut row = vec![fmt17(self.times[k])];
            row.extend(s.x.iter().chain(&s.z).map(|&v| fmt17(v)));
            row.push(match &self.lyapunov {
                Some(v) => fmt17(v[k]),
                None => String::new(),
            });
            row.push(fmt17(self.residuals[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Euler integrator with optional diagnostics.
#[derive(Debug, Clone)]
pub struct Integrator<'a> {
    lp: &'a StandardFormLp,
    cfg: IntegratorConfig,
    center: Option<PrimalDualState>,
    reference: Option<&'a StandardFormLp>,
}

impl<'a> Integrator<'a> {
    pub fn new(lp: &'a StandardFormLp, cfg: IntegratorConfig) -> Self {
        Integrator {
            lp,
            cfg,
            center: None,
            reference: None,
        }
    }

    /// Record `V` against this point.
    pub fn with_center(mut self, center: PrimalDualState) -> Self {
        self.center = Some(center);
        self
    }

    /// Measure residuals (and the stopping rule) against another program,
    /// typically the perturbed program of a constant disturbance.
    pub fn residual_against(mut self, reference: &'a StandardFormLp) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub(crate) fn check_start(&self, s0: &PrimalDualState) -> Result<(), DynamicsError> {
        self.cfg.validate()?;
        if s0.x.len() != self.lp.n() || s0.z.len() != self.lp.m() {
            return Err(DynamicsError::Dimension(format!(
                "initial state is ({}, {}), program is ({}, {})",
                s0.x.len(),
                s0.z.len(),
                self.lp.n(),
                self.lp.m()
            )));
        }
        check_nonnegative(&s0.x)
    }

    pub(crate) fn recorder(&self) -> Recorder<'_> {
        Recorder {
            reference: self.reference.unwrap_or(self.lp),
            center: self.center.as_ref(),
            every: self.cfg.record_every,
            traj: Trajectory {
                lyapunov: self.center.as_ref().map(|_| Vec::new()),
                ..Trajectory::default()
            },
        }
    }

    pub fn run(
        &self,
        s0: &PrimalDualState,
        dist: &DisturbanceSignal,
    ) -> Result<Trajectory, DynamicsError> {
        self.run_with_flow(s0, dist, |_, _, s| {
            (nominal_flow(self.lp, s), constraint_residual(self.lp, &s.x))
        })
    }

    /// Runs the integrator with a caller-supplied raw flow `(f_x, f_z)` at
    /// step `k`, time `t`. Projection, disturbance and recording are the
    /// same as in [`Integrator::run`].
    pub fn run_with_flow<F>(
        &self,
        s0: &PrimalDualState,
        dist: &DisturbanceSignal,
        mut flow: F,
    ) -> Result<Trajectory, DynamicsError>
    where
        F: FnMut(usize, f64, &PrimalDualState) -> (Vec<f64>, Vec<f64>),
    {
        self.check_start(s0)?;
        let dt = self.cfg.dt;
        let steps = self.cfg.max_steps();
        let mut rec = self.recorder();
        let mut s = s0.clone();
        let mut res = rec.observe(0, 0.0, &s, dist.sample(0.0), true);
        if res <= self.cfg.stop_tol {
            rec.traj.time_to_tol = Some(0.0);
            return Ok(rec.finish(0));
        }
        for k in 0..steps {
            let t = k as f64 * dt;
            let w = dist.sample(t);
            let (fx, fz) = flow(k, t, &s);
            s = euler_update(&s, &fx, &fz, dt, &w);
            let t_next = (k + 1) as f64 * dt;
            if !s.is_finite() {
                return Err(DynamicsError::NonFinite { time: t_next });
            }
            let last = k + 1 == steps;
            res = rec.observe(k + 1, t_next, &s, dist.sample(t_next), last);
            if res <= self.cfg.stop_tol {
                rec.traj.time_to_tol = Some(t_next);
                rec.force_record(t_next, &s, dist.sample(t_next), res);
                return Ok(rec.finish(k + 1));
            }
        }
        Ok(rec.finish(steps))
    }
}

/// Collects the recorded samples of a run.
pub(crate) struct Recorder<'a> {
    reference: &'a StandardFormLp,
    center: Option<&'a PrimalDualState>,
    every: usize,
    pub traj: Trajectory,
}

impl Recorder<'_> {
    /// Computes the residual of `s`, recording it when due. Returns the residual.
    pub fn observe(
        &mut self,
        k: usize,
        t: f64,
        s: &PrimalDualState,
        w: PerturbationVector,
        force: bool,
    ) -> f64 {
        let res = kkt_residual(self.reference, s);
        if force || k % self.every == 0 {
            self.push(t, s, w, res);
        }
        res
    }

    /// Records `s` unless it was the last sample taken.
    pub fn force_record(&mut self, t: f64, s: &PrimalDualState, w: PerturbationVector, res: f64) {
        if self.traj.times.last() != Some(&t) {
            self.push(t, s, w, res);
        }
    }

    fn push(&mut self, t: f64, s: &PrimalDualState, w: PerturbationVector, res: f64) {
        self.traj.times.push(t);
        self.traj.states.push(s.clone());
        self.traj.residuals.push(res);
        if let (Some(c), Some(v)) = (self.center, self.traj.lyapunov.as_mut()) {
            v.push(lyapunov_value(s, c));
        }
        self.traj.disturbance_log.push(w);
    }

    pub fn finish(mut self, steps: usize) -> Trajectory {
        self.traj.steps = steps;
        self.traj
    }
}

/// Integrates from `s0` under `dist` with the default diagnostics.
pub fn integrate(
    lp: &StandardFormLp,
    s0: &PrimalDualState,
    cfg: &IntegratorConfig,
    dist: &DisturbanceSignal,
) -> Result<Trajectory, DynamicsError> {
    Integrator::new(lp, *cfg).run(s0, dist)
}

/// Largest `‖v‖₂` over the recorded states (undisturbed flow).
pub fn peak_speed(lp: &StandardFormLp, traj: &Trajectory) -> f64 {
    let zero = PerturbationVector::zeros(lp.n(), lp.m());
    traj.states
        .iter()
        .filter_map(|s| projected_velocity(lp, s, &zero).ok())
        .map(|v| v.norm2())
        .fold(0.0, f64::max)
}

/// Largest distance of a recorded state from `point`.
pub fn peak_deviation(traj: &Trajectory, point: &PrimalDualState) -> f64 {
    traj.states
        .iter()
        .map(|s| s.distance(point))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::lp_model::lp1;

    fn st(x: &[f64], z: &[f64]) -> PrimalDualState {
        PrimalDualState::new(x.to_vec(), z.to_vec())
    }

    fn zero_w() -> PerturbationVector {
        PerturbationVector::zeros(2, 1)
    }

    #[test]
    fn nominal_flow_examples() {
        let lp = lp1();
        assert_eq!(nominal_flow(&lp, &st(&[1.0, 0.0], &[-1.0])), vec![0.0, -1.0]);
        assert_eq!(nominal_flow(&lp, &st(&[0.0, 0.0], &[0.0])), vec![0.0, -1.0]);
        let zero_a = StandardFormLp::new("", vec![vec![0.0, 0.0]], vec![1.0], vec![1.0, -2.0])
            .unwrap();
        assert_eq!(nominal_flow(&zero_a, &st(&[3.0, 4.0], &[5.0])), vec![-1.0, 2.0]);
    }

    #[test]
    fn projected_velocity_examples() {
        let lp = lp1();
        let v = projected_velocity(&lp, &st(&[1.0, 0.0], &[-1.0]), &zero_w()).unwrap();
        assert!(v.is_zero());
        let v = projected_velocity(&lp, &st(&[0.0, 0.0], &[0.0]), &zero_w()).unwrap();
        assert_eq!(v.x, vec![0.0, 0.0]);
        assert_eq!(v.z, vec![-1.0]);
        // interior: no projection
        let s = st(&[0.3, 0.2], &[0.4]);
        let w = PerturbationVector::new(vec![0.1, -0.2], vec![0.05]);
        let v = projected_velocity(&lp, &s, &w).unwrap();
        let f = nominal_flow(&lp, &s);
        assert_eq!(v.x, vec![f[0] + 0.1, f[1] - 0.2]);
        assert_eq!(v.z, vec![(0.3 + 0.2 - 1.0) + 0.05]);
    }

    #[test]
    fn projected_velocity_rejects_negative_primal() {
        let err = projected_velocity(&lp1(), &st(&[-0.5, 0.0], &[0.0]), &zero_w()).unwrap_err();
        assert!(matches!(err, DynamicsError::NegativePrimal { index: 0, .. }));
        // rounding-level negatives are tolerated
        assert!(projected_velocity(&lp1(), &st(&[-1e-14, 0.0], &[0.0]), &zero_w()).is_ok());
    }

    #[test]
    fn interval_examples() {
        let lp = lp1();
        let iv = saddle_velocity_interval(&lp, 2.0, &st(&[0.0, 0.0], &[0.0]));
        assert_eq!(iv[1], Interval { lo: -1.0, hi: 1.0 });
        assert_eq!(iv[0], Interval { lo: 0.0, hi: 2.0 });
        assert_eq!(iv[2], Interval::point(-1.0));
        let iv = saddle_velocity_interval(&lp, 2.0, &st(&[0.5, 0.25], &[1.0]));
        assert!(iv.iter().all(Interval::is_singleton));
        let iv = saddle_velocity_interval(&lp, 2.0, &st(&[-0.5, 0.25], &[1.0]));
        assert!(iv[0].is_singleton());
    }

    #[test]
    fn projected_velocity_inside_interval_when_k_dominates() {
        let lp = lp1();
        for s in [
            st(&[0.0, 0.0], &[0.0]),
            st(&[0.0, 0.7], &[-2.0]),
            st(&[1.5, 0.0], &[0.5]),
        ] {
            let f = nominal_flow(&lp, &s);
            let k = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let v = projected_velocity(&lp, &s, &zero_w()).unwrap();
            let iv = saddle_velocity_interval(&lp, k, &s);
            for (val, i) in v.x.iter().chain(&v.z).zip(&iv) {
                assert!(i.contains(*val, 0.0), "{val} not in {i:?}");
            }
        }
    }

    #[test]
    fn k1_examples() {
        let lp = lp1();
        let center = st(&[1.0, 0.0], &[-1.0]);
        let k1 = compute_k1(&lp, &center, 0.5);
        assert!((k1 - (1.0 + 3f64.sqrt())).abs() < 1e-15);
        assert_eq!(compute_k1(&lp, &center, 0.0), 1.0);
        assert!((compute_k1(&lp, &center, 1e-12) - 1.0).abs() < 1e-5);
        let zero_a = StandardFormLp::new("", vec![vec![0.0, 0.0]], vec![1.0], vec![1.5, -2.5])
            .unwrap();
        assert_eq!(compute_k1(&zero_a, &st(&[0.0, 0.0], &[0.0]), 9.0), 2.5);
    }

    #[test]
    fn k1_matches_sampled_maximum() {
        // Affine max over a ball, checked against random points of the sphere.
        use rand::{Rng, SeedableRng};
        let lp = StandardFormLp::new(
            "",
            vec![vec![1.0, -0.5, 2.0], vec![0.0, 1.0, 1.0]],
            vec![1.0, 2.0],
            vec![0.5, -1.0, 1.0],
        )
        .unwrap();
        let center = st(&[0.5, 1.0, 0.2], &[0.1, -0.3]);
        let rho = 0.8;
        let k1 = compute_k1(&lp, &center, rho);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut best = 0.0f64;
        for _ in 0..20000 {
            let d: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let scale = (2.0 * rho).sqrt() / norm2(&d);
            let s = st(
                &[center.x[0] + d[0] * scale, center.x[1] + d[1] * scale, center.x[2] + d[2] * scale],
                &[center.z[0] + d[3] * scale, center.z[1] + d[4] * scale],
            );
            let f = nominal_flow(&lp, &s);
            best = best.max(f.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        assert!(best <= k1 + 1e-12);
        assert!(best >= 0.97 * k1, "sampled {best}, closed form {k1}");
    }

    #[test]
    fn lyapunov_examples() {
        let star = st(&[1.0, 0.0], &[-1.0]);
        assert_eq!(lyapunov_value(&star, &star), 0.0);
        assert_eq!(lyapunov_value(&st(&[0.0, 0.0], &[0.0]), &star), 1.0);
    }

    #[test]
    fn step_examples() {
        let lp = lp1();
        let eq = st(&[1.0, 0.0], &[-1.0]);
        assert_eq!(step(&lp, &eq, 0.01, &zero_w()), eq);
        let s = step(&lp, &st(&[0.0, 0.0], &[0.0]), 0.01, &zero_w());
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(s.z, vec![-0.01]);
        // a large step past the boundary clamps to exactly zero
        let s = step(&lp, &st(&[0.001, 0.5], &[3.0]), 0.1, &zero_w());
        assert_eq!(s.x[0], 0.0);
    }

    #[test]
    fn integrate_lp1_converges() {
        let lp = lp1();
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 100.0,
            stop_tol: 1e-3,
            record_every: 10,
        };
        let traj = integrate(&lp, &st(&[0.0, 0.0], &[0.0]), &cfg, &DisturbanceSignal::zero(2, 1))
            .unwrap();
        assert!(traj.terminal_residual() <= 1e-3);
        let end = traj.terminal();
        assert!((end.x[0] - 1.0).abs() < 1e-2);
        assert!(end.x[1].abs() < 1e-2);
        assert!((end.z[0] + 1.0).abs() < 1e-2);
        assert!(traj.time_to_tol.is_some());
    }

    #[test]
    fn start_at_solution_is_immediate() {
        let lp = lp1();
        let cfg = IntegratorConfig::default();
        let s0 = st(&[1.0, 0.0], &[-1.0]);
        let traj = integrate(&lp, &s0, &cfg, &DisturbanceSignal::zero(2, 1)).unwrap();
        assert_eq!(traj.steps, 0);
        assert_eq!(traj.time_to_tol, Some(0.0));
        assert_eq!(traj.states, vec![s0.clone()]);

        // and stepping never moves it
        let mut s = s0.clone();
        for _ in 0..100 {
            s = step(&lp, &s, 0.01, &zero_w());
        }
        assert_eq!(s, s0);
    }

    #[test]
    fn non_finite_reported() {
        let lp = lp1();
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 1.0,
            stop_tol: 0.0,
            record_every: 1,
        };
        let w = PerturbationVector::new(vec![0.0, 0.0], vec![f64::INFINITY]);
        let err = integrate(&lp, &st(&[1.0, 1.0], &[0.0]), &cfg, &DisturbanceSignal::constant(w))
            .unwrap_err();
        assert!(matches!(err, DynamicsError::NonFinite { .. }));
    }

    #[test]
    fn config_validation() {
        let mut cfg = IntegratorConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dt = 0.2;
        assert!(cfg.validate().is_err());
        cfg.dt = 0.01;
        cfg.record_every = 0;
        assert!(cfg.validate().is_err());
        assert_eq!(IntegratorConfig { dt: 0.01, t_max: 1.0, ..Default::default() }.max_steps(), 100);
    }

    #[test]
    fn csv_layout() {
        let lp = lp1();
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 0.05,
            stop_tol: 0.0,
            record_every: 1,
        };
        let traj = Integrator::new(&lp, cfg)
            .with_center(st(&[1.0, 0.0], &[-1.0]))
            .run(&st(&[0.0, 0.0], &[0.0]), &DisturbanceSignal::zero(2, 1))
            .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,z_1,V,kkt");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 6);
        assert_eq!(first[4], "1.0000000000000000e0");
        assert_eq!(text.lines().count(), 1 + 6);
        let parsed: f64 = first[5].parse().unwrap();
        assert_eq!(parsed, 1.0);
    }
}
