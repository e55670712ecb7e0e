//! Additive disturbance signals `w(t) = (w_x(t), w_z(t))`.
//!
//! Every signal is a pure function of time. The seeded noise kind is
//! piecewise constant over intervals of a fixed width, with the value on each
//! interval drawn from a ChaCha stream indexed by the interval number, so a
//! run can be replayed exactly.

use crate::lp_model::PerturbationVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Shape of a transient that dies out.
#[derive(Debug, Clone, PartialEq)]
pub enum TransientShape {
    /// `a·e^{−λ(t−t₀)}` on one stacked component (`0..n` are x, `n..n+m` are z).
    Pulse { component: usize },
    /// `a·e^{−λ(t−t₀)}·sin(ωt + φ_k)` on every component, phases drawn from the seed.
    DecayingSinusoid { omega: f64, phases: Vec<f64> },
}

/// A transient with finite integral, gated to `[onset, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transient {
    pub amplitude: f64,
    pub onset: f64,
    pub decay: f64,
    pub shape: TransientShape,
}

impl Transient {
    pub fn pulse(amplitude: f64, onset: f64, decay: f64, component: usize) -> Self {
        Transient {
            amplitude,
            onset,
            decay,
            shape: TransientShape::Pulse { component },
        }
    }

    /// Sinusoidal burst on all `n + m` components with seeded phases.
    pub fn sinusoid(
        amplitude: f64,
        onset: f64,
        decay: f64,
        omega: f64,
        dims: (usize, usize),
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..dims.0 + dims.1).map(|_| rng.gen::<f64>() * TAU).collect();
        Transient {
            amplitude,
            onset,
            decay,
            shape: TransientShape::DecayingSinusoid { omega, phases },
        }
    }

    fn add_to(&self, t: f64, out: &mut [f64]) {
        if t < self.onset {
            return;
        }
        let envelope = self.amplitude * (-self.decay * (t - self.onset)).exp();
        match &self.shape {
            TransientShape::Pulse { component } => out[*component] += envelope,
            TransientShape::DecayingSinusoid { omega, phases } => {
                for (o, phi) in out.iter_mut().zip(phases) {
                    *o += envelope * (omega * t + phi).sin();
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceKind {
    Zero,
    Constant(PerturbationVector),
    FiniteEnergy(Transient),
    /// Converges to `limit`; the transient has finite integral.
    FiniteVariation {
        limit: PerturbationVector,
        transient: Transient,
    },
    /// Uniform on `[−amplitude, amplitude]`, redrawn every `hold` seconds.
    SeededNoise { amplitude: f64, hold: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSignal {
    pub kind: DisturbanceKind,
    pub dims: (usize, usize),
}

impl DisturbanceSignal {
    pub fn zero(n: usize, m: usize) -> Self {
        DisturbanceSignal {
            kind: DisturbanceKind::Zero,
            dims: (n, m),
        }
    }

    pub fn constant(w: PerturbationVector) -> Self {
        let dims = (w.w_x.len(), w.w_z.len());
        DisturbanceSignal {
            kind: DisturbanceKind::Constant(w),
            dims,
        }
    }

    pub fn finite_energy(dims: (usize, usize), transient: Transient) -> Self {
        DisturbanceSignal {
            kind: DisturbanceKind::FiniteEnergy(transient),
            dims,
        }
    }

    pub fn finite_variation(limit: PerturbationVector, transient: Transient) -> Self {
        let dims = (limit.w_x.len(), limit.w_z.len());
        DisturbanceSignal {
            kind: DisturbanceKind::FiniteVariation { limit, transient },
            dims,
        }
    }

    pub fn seeded_noise(dims: (usize, usize), amplitude: f64, hold: f64, seed: u64) -> Self {
        DisturbanceSignal {
            kind: DisturbanceKind::SeededNoise {
                amplitude,
                hold,
                seed,
            },
            dims,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DisturbanceKind::Zero)
    }

    /// The constant value for time-invariant kinds.
    pub fn constant_value(&self) -> Option<PerturbationVector> {
        match &self.kind {
            DisturbanceKind::Zero => Some(PerturbationVector::zeros(self.dims.0, self.dims.1)),
            DisturbanceKind::Constant(w) => Some(w.clone()),
            _ => None,
        }
    }

    /// The value the signal settles to, when it settles.
    pub fn limit_value(&self) -> Option<PerturbationVector> {
        match &self.kind {
            DisturbanceKind::FiniteEnergy(_) => {
                Some(PerturbationVector::zeros(self.dims.0, self.dims.1))
            }
            DisturbanceKind::FiniteVariation { limit, .. } => Some(limit.clone()),
            DisturbanceKind::SeededNoise { .. } => None,
            _ => self.constant_value(),
        }
    }

    pub fn sample(&self, t: f64) -> PerturbationVector {
        let (n, m) = self.dims;
        let mut stacked = vec![0.0; n + m];
        match &self.kind {
            DisturbanceKind::Zero => {}
            DisturbanceKind::Constant(w) => return w.clone(),
            DisturbanceKind::FiniteEnergy(tr) => tr.add_to(t, &mut stacked),
            DisturbanceKind::FiniteVariation { limit, transient } => {
                stacked[..n].copy_from_slice(&limit.w_x);
                stacked[n..].copy_from_slice(&limit.w_z);
                transient.add_to(t, &mut stacked);
            }
            DisturbanceKind::SeededNoise {
                amplitude,
                hold,
                seed,
            } => {
                let slot = (t / hold).floor().max(0.0) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(slot);
                for v in stacked.iter_mut() {
                    *v = amplitude * (2.0 * rng.gen::<f64>() - 1.0);
                }
            }
        }
        let w_z = stacked.split_off(n);
        PerturbationVector::new(stacked, w_z)
    }
}

/// Left Riemann sum of `‖w(t) − w̄‖₂` over `[0, horizon]` with step `dt`.
pub fn variation_integral(
    sig: &DisturbanceSignal,
    w_bar: &PerturbationVector,
    horizon: f64,
    dt: f64,
) -> f64 {
    let steps = (horizon / dt).round() as usize;
    (0..steps)
        .map(|k| {
            let w = sig.sample(k as f64 * dt);
            let d: f64 = w
                .w_x
                .iter()
                .zip(&w_bar.w_x)
                .chain(w.w_z.iter().zip(&w_bar.w_z))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.sqrt() * dt
        })
        .sum()
}

/// Scenario-file form: `{"kind": "...", "params": {...}, "seed": int}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceConfig {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum DisturbanceError {
    #[error("unknown disturbance kind {0:?}")]
    UnknownKind(String),
    #[error("bad parameters for {kind}: {source}")]
    Params {
        kind: String,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn default_amplitude() -> f64 {
    1.0
}
fn default_decay() -> f64 {
    0.5
}
fn default_omega() -> f64 {
    2.0
}
fn default_shape() -> String {
    "sinusoid".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    #[serde(default)]
    w_x: Option<Vec<f64>>,
    #[serde(default)]
    w_z: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct TransientParams {
    #[serde(default = "default_amplitude")]
    amplitude: f64,
    #[serde(default)]
    onset: f64,
    #[serde(default = "default_decay")]
    decay: f64,
    #[serde(default = "default_shape")]
    shape: String,
    #[serde(default)]
    component: usize,
    #[serde(default = "default_omega")]
    omega: f64,
    #[serde(default)]
    w_x: Option<Vec<f64>>,
    #[serde(default)]
    w_z: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct NoiseParams {
    #[serde(default = "default_amplitude")]
    amplitude: f64,
    hold: f64,
}

fn vector_or_zero(
    v: Option<Vec<f64>>,
    len: usize,
    what: &str,
) -> Result<Vec<f64>, DisturbanceError> {
    match v {
        None => Ok(vec![0.0; len]),
        Some(v) if v.len() == len => Ok(v),
        Some(v) => Err(DisturbanceError::Invalid(format!(
            "{what} has length {}, expected {len}",
            v.len()
        ))),
    }
}

impl DisturbanceConfig {
    pub fn zero() -> Self {
        DisturbanceConfig {
            kind: "zero".into(),
            params: serde_json::Value::Null,
            seed: 0,
        }
    }

    /// Builds the signal for a program with `n` variables and `m` constraints.
    pub fn to_signal(&self, n: usize, m: usize) -> Result<DisturbanceSignal, DisturbanceError> {
        let params = if self.params.is_null() {
            serde_json::json!({})
        } else {
            self.params.clone()
        };
        let parse_err = |source| DisturbanceError::Params {
            kind: self.kind.clone(),
            source,
        };
        let transient = |p: &TransientParams| -> Result<Transient, DisturbanceError> {
            if !(p.decay > 0.0) {
                return Err(DisturbanceError::Invalid(
                    "decay rate must be positive for the integral to be finite".into(),
                ));
            }
            match p.shape.as_str() {
                "pulse" => {
                    if p.component >= n + m {
                        return Err(DisturbanceError::Invalid(format!(
                            "pulse component {} out of range 0..{}",
                            p.component,
                            n + m
                        )));
                    }
                    Ok(Transient::pulse(p.amplitude, p.onset, p.decay, p.component))
                }
                "sinusoid" => Ok(Transient::sinusoid(
                    p.amplitude,
                    p.onset,
                    p.decay,
                    p.omega,
                    (n, m),
                    self.seed,
                )),
                other => Err(DisturbanceError::Invalid(format!(
                    "unknown transient shape {other:?}"
                ))),
            }
        };
        match self.kind.as_str() {
            "zero" => Ok(DisturbanceSignal::zero(n, m)),
            "constant" => {
                let p: ConstantParams = serde_json::from_value(params).map_err(parse_err)?;
                Ok(DisturbanceSignal::constant(PerturbationVector::new(
                    vector_or_zero(p.w_x, n, "w_x")?,
                    vector_or_zero(p.w_z, m, "w_z")?,
                )))
            }
            "finite_energy" => {
                let p: TransientParams = serde_json::from_value(params).map_err(parse_err)?;
                Ok(DisturbanceSignal::finite_energy((n, m), transient(&p)?))
            }
            "finite_variation" => {
                let p: TransientParams = serde_json::from_value(params).map_err(parse_err)?;
                let limit = PerturbationVector::new(
                    vector_or_zero(p.w_x.clone(), n, "w_x")?,
                    vector_or_zero(p.w_z.clone(), m, "w_z")?,
                );
                Ok(DisturbanceSignal::finite_variation(limit, transient(&p)?))
            }
            "seeded_noise" => {
                let p: NoiseParams = serde_json::from_value(params).map_err(parse_err)?;
                if !(p.hold > 0.0) {
                    return Err(DisturbanceError::Invalid("hold must be positive".into()));
                }
                Ok(DisturbanceSignal::seeded_noise(
                    (n, m),
                    p.amplitude,
                    p.hold,
                    self.seed,
                ))
            }
            other => Err(DisturbanceError::UnknownKind(other.into())),
        }
    }
}
