use crate::disturbances::DisturbanceConfig;
use crate::dynamics::{Integrator, IntegratorConfig, Trajectory};
use crate::lp_model::{kkt_residual, perturbed_program, validate_lp, PrimalDualState, StandardFormLp, ValidationReport};
use crate::network::{rcg_integrate_with, validate_distributed, Checkpoint, CommGraph, ScheduleJson};
use crate::oracle::{self, OracleSolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use super::{build_optimal_control_lp, ExperimentError, OptimalControlSpec};

/// An LP given inline or as a path relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LpSource {
    Path(PathBuf),
    Inline(StandardFormLp),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    Zero,
    /// The oracle's primal-dual solution of the unperturbed program.
    Oracle,
    Explicit { x: Vec<f64>, z: Vec<f64> },
    /// `x` uniform in `[0, 1]`, `z` uniform in `[−1, 1]`.
    Random { seed: u64 },
}

impl InitialState {
    pub fn resolve(&self, n: usize, m: usize, sol: &OracleSolution) -> Result<PrimalDualState, ExperimentError> {
        match self {
            InitialState::Zero => Ok(PrimalDualState::zeros(n, m)),
            InitialState::Oracle => Ok(sol.state()),
            InitialState::Explicit { x, z } => {
                if x.len() != n || z.len() != m {
                    return Err(ExperimentError::Invalid(format!(
                        "initial state is ({}, {}), program is ({n}, {m})",
                        x.len(),
                        z.len()
                    )));
                }
                Ok(PrimalDualState::new(x.clone(), z.clone()))
            }
            InitialState::Random { seed } => Ok(random_start(n, m, *seed)),
        }
    }
}

pub fn random_start(n: usize, m: usize, seed: u64) -> PrimalDualState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let z = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    PrimalDualState::new(x, z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for the output files; nothing is written when absent.
    pub dir: Option<PathBuf>,
    pub trajectory: String,
    pub metrics: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            trajectory: "trajectory.csv".into(),
            metrics: "metrics.json".into(),
        }
    }
}

fn zero_disturbance() -> DisturbanceConfig {
    DisturbanceConfig::zero()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub lp: Option<LpSource>,
    #[serde(default)]
    pub optimal_control: Option<OptimalControlSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "zero_disturbance")]
    pub disturbance: DisturbanceConfig,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub graph: Option<CommGraph>,
    #[serde(default)]
    pub schedule: Option<ScheduleJson>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn for_lp(lp: StandardFormLp) -> Self {
        ScenarioConfig {
            name: lp.name.clone(),
            lp: Some(LpSource::Inline(lp)),
            optimal_control: None,
            integrator: IntegratorConfig::default(),
            disturbance: DisturbanceConfig::zero(),
            initial: InitialState::Zero,
            graph: None,
            schedule: None,
            output: OutputConfig::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Loads or builds the program; relative LP paths are taken from `base_dir`.
    pub fn load_lp(&self, base_dir: &Path) -> Result<StandardFormLp, ExperimentError> {
        match (&self.lp, &self.optimal_control) {
            (Some(_), Some(_)) => Err(ExperimentError::Invalid(
                "give either lp or optimal_control, not both".into(),
            )),
            (None, None) => Err(ExperimentError::Invalid("scenario has no lp".into())),
            (Some(LpSource::Inline(lp)), None) => Ok(lp.clone()),
            (Some(LpSource::Path(p)), None) => Ok(StandardFormLp::from_json_file(base_dir.join(p))?),
            (None, Some(spec)) => build_optimal_control_lp(spec),
        }
    }
}

/// Summary written as `metrics.json`. `time_to_tol` is `null` when the
/// stopping tolerance was never reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub terminal_kkt: f64,
    pub terminal_value_gap: f64,
    pub time_to_tol: Option<f64>,
    pub steps: usize,
    pub perturbed_kkt: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub lp: StandardFormLp,
    pub oracle: OracleSolution,
    pub perturbed: Option<StandardFormLp>,
    pub trajectory: Trajectory,
    pub checkpoints: Option<Vec<Checkpoint>>,
    pub distributed: Option<ValidationReport>,
    pub metrics: RunMetrics,
}

fn invalid_report(report: &ValidationReport) -> ExperimentError {
    ExperimentError::Invalid(report.errors().collect::<Vec<_>>().join("; "))
}

pub fn run_scenario(cfg: &ScenarioConfig, base_dir: &Path) -> Result<ScenarioOutcome, ExperimentError> {
    let lp = cfg.load_lp(base_dir)?;
    let report = validate_lp(&lp);
    if !report.ok {
        return Err(invalid_report(&report));
    }
    if cfg.schedule.is_some() && cfg.graph.is_none() {
        return Err(ExperimentError::Invalid("a failure schedule needs a graph".into()));
    }
    cfg.integrator.validate()?;
    let (n, m) = (lp.n(), lp.m());
    let signal = cfg.disturbance.to_signal(n, m)?;
    let sol = oracle::solve(&lp)?;
    let perturbed = signal
        .limit_value()
        .filter(|w| !w.is_zero())
        .map(|w| perturbed_program(&lp, &w));
    let center = match &perturbed {
        Some(p) => oracle::solve(p).ok().map(|s| s.state()),
        None => Some(sol.state()),
    };
    let s0 = cfg.initial.resolve(n, m, &sol)?;

    let mut integrator = Integrator::new(&lp, cfg.integrator);
    if let Some(p) = &perturbed {
        integrator = integrator.residual_against(p);
    }
    if let Some(c) = &center {
        integrator = integrator.with_center(c.clone());
    }

    let distributed = match &cfg.graph {
        Some(g) => {
            let r = validate_distributed(&lp, g);
            if !r.ok {
                return Err(invalid_report(&r));
            }
            Some(r)
        }
        None => None,
    };
    let (trajectory, checkpoints) = match (&cfg.schedule, &cfg.graph) {
        (Some(sched), Some(g)) => {
            let sched = sched.build(g)?;
            let run = rcg_integrate_with(integrator, &lp, g, &sched, &s0, &signal, center.as_ref())?;
            (run.trajectory, Some(run.checkpoints))
        }
        _ => (integrator.run(&s0, &signal)?, None),
    };

    let terminal = trajectory.terminal();
    let metrics = RunMetrics {
        terminal_kkt: kkt_residual(&lp, terminal),
        terminal_value_gap: (lp.objective(&terminal.x) - sol.optimal_value).abs(),
        time_to_tol: trajectory.time_to_tol,
        steps: trajectory.steps,
        perturbed_kkt: perturbed.as_ref().map(|p| kkt_residual(p, terminal)),
    };
    Ok(ScenarioOutcome {
        lp,
        oracle: sol,
        perturbed,
        trajectory,
        checkpoints,
        distributed,
        metrics,
    })
}

impl ScenarioOutcome {
    /// Writes the trajectory CSV, the metrics JSON and, for link-failure
    /// runs, `checkpoints.json` into `dir`. Returns the written paths.
    pub fn write(&self, dir: &Path, names: &OutputConfig) -> Result<Vec<PathBuf>, ExperimentError> {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(format!("creating {}", dir.display()), e))?;
        let mut written = Vec::new();
        let path = dir.join(&names.trajectory);
        let file = fs::File::create(&path)
            .map_err(|e| ExperimentError::io(format!("creating {}", path.display()), e))?;
        self.trajectory
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| ExperimentError::io(format!("writing {}", path.display()), e))?;
        written.push(path);

        let mut put = |name: &str, json: String| -> Result<(), ExperimentError> {
            let path = dir.join(name);
            fs::write(&path, json + "\n")
                .map_err(|e| ExperimentError::io(format!("writing {}", path.display()), e))?;
            written.push(path);
            Ok(())
        };
        put(&names.metrics, serde_json::to_string_pretty(&self.metrics)?)?;
        if let Some(c) = &self.checkpoints {
            put("checkpoints.json", serde_json::to_string_pretty(c)?)?;
        }
        Ok(written)
    }
}
