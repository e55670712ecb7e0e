//! Communication graphs, z-ownership and link failures.
//!
//! Each primal variable is an agent. Constraint row `ℓ` couples the agents
//! with a nonzero coefficient in it; its multiplier `z_ℓ` is integrated by the
//! lowest-indexed such agent, the row's owner. While a link is down, the
//! agents at its ends keep using the values they last received, which are
//! refreshed at every breakpoint of the failure schedule.
//!
//! Agents are 0-based in the API and 1-based in JSON files.

use crate::dynamics::{
    constraint_residual, nominal_flow, project, DynamicsError, Integrator,
    IntegratorConfig, Trajectory, Velocity,
};
use crate::disturbances::DisturbanceSignal;
use crate::linalg::{dot, Matrix};
use crate::lp_model::{kkt_residual, PrimalDualState, StandardFormLp, ValidationReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("constraint row {0} has no nonzero coefficient")]
    ZeroRow(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid failure schedule: {0}")]
    InvalidSchedule(String),
    #[error("graph is not connected with respect to A: {0}")]
    NotDistributed(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Undirected edge stored as `(min, max)`.
pub type Edge = (usize, usize);

pub fn edge(i: usize, j: usize) -> Edge {
    (i.min(j), i.max(j))
}

/// Undirected simple graph on agents `0..n_agents`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct CommGraph {
    n_agents: usize,
    edges: BTreeSet<Edge>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for CommGraph {
    type Error = NetworkError;
    fn try_from(g: GraphJson) -> Result<Self, NetworkError> {
        let mut edges = Vec::with_capacity(g.edges.len());
        for [i, j] in g.edges {
            if i == 0 || j == 0 {
                return Err(NetworkError::InvalidGraph(
                    "agent ids in JSON are 1-based".into(),
                ));
            }
            edges.push((i - 1, j - 1));
        }
        CommGraph::new(g.n, edges)
    }
}

impl From<CommGraph> for GraphJson {
    fn from(g: CommGraph) -> Self {
        GraphJson {
            n: g.n_agents,
            edges: g.edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        }
    }
}

impl CommGraph {
    pub fn new(
        n_agents: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, NetworkError> {
        if n_agents == 0 {
            return Err(NetworkError::InvalidGraph("graph has no agents".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(NetworkError::InvalidGraph(format!("self-loop at agent {}", i + 1)));
            }
            if i >= n_agents || j >= n_agents {
                return Err(NetworkError::InvalidGraph(format!(
                    "edge ({}, {}) outside 1..={n_agents}",
                    i + 1,
                    j + 1
                )));
            }
            set.insert(edge(i, j));
        }
        Ok(CommGraph {
            n_agents,
            edges: set,
        })
    }

    pub fn empty(n_agents: usize) -> Self {
        CommGraph {
            n_agents,
            edges: BTreeSet::new(),
        }
    }

    /// The smallest graph connected with respect to `a`: one edge per pair
    /// of agents sharing a constraint row.
    pub fn coupling_graph(a: &Matrix) -> Self {
        let mut edges = BTreeSet::new();
        for l in 0..a.rows() {
            let support: Vec<usize> = nonzeros(a.row(l)).collect();
            for (p, &i) in support.iter().enumerate() {
                for &j in &support[p + 1..] {
                    edges.insert(edge(i, j));
                }
            }
        }
        CommGraph {
            n_agents: a.cols().max(1),
            edges,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&edge(i, j))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }
}

fn nonzeros(row: &[f64]) -> impl Iterator<Item = usize> + '_ {
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i)
}

/// First pair of agents sharing row `ℓ` without an edge, as `(ℓ, i, j)`.
fn first_uncovered_pair(g: &CommGraph, a: &Matrix) -> Option<(usize, usize, usize)> {
    for l in 0..a.rows() {
        let support: Vec<usize> = nonzeros(a.row(l)).collect();
        for (p, &i) in support.iter().enumerate() {
            for &j in &support[p + 1..] {
                if !g.has_edge(i, j) {
                    return Some((l, i, j));
                }
            }
        }
    }
    None
}

/// Every pair of agents with nonzero coefficients in a common row is an edge.
pub fn is_connected_wrt(g: &CommGraph, a: &Matrix) -> bool {
    first_uncovered_pair(g, a).is_none()
}

/// Agent integrating `z_ℓ`: the lowest index with `a_{ℓ,i} ≠ 0`.
pub fn z_owner(a: &Matrix, l: usize) -> Result<usize, NetworkError> {
    nonzeros(a.row(l)).next().ok_or(NetworkError::ZeroRow(l))
}

pub fn z_owners(a: &Matrix) -> Result<Vec<usize>, NetworkError> {
    (0..a.rows()).map(|l| z_owner(a, l)).collect()
}

/// What one agent must know and track to run its part of the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRole {
    pub agent: usize,
    /// Rows with a nonzero coefficient for this agent; it needs `b_ℓ` and the
    /// nonzero entries of each.
    pub rows: Vec<usize>,
    /// Multipliers it reads.
    pub reads_z: Vec<usize>,
    /// Multipliers it integrates.
    pub owns_z: Vec<usize>,
    /// Agents whose state it reads.
    pub reads_x: Vec<usize>,
}

pub fn agent_roles(a: &Matrix) -> Result<Vec<AgentRole>, NetworkError> {
    let owners = z_owners(a)?;
    Ok((0..a.cols())
        .map(|i| {
            let rows: Vec<usize> = (0..a.rows()).filter(|&l| a[(l, i)] != 0.0).collect();
            let mut reads_x = BTreeSet::new();
            for &l in &rows {
                reads_x.extend(nonzeros(a.row(l)).filter(|&j| j != i));
            }
            AgentRole {
                agent: i,
                owns_z: (0..a.rows()).filter(|&l| owners[l] == i).collect(),
                reads_z: rows.clone(),
                rows,
                reads_x: reads_x.into_iter().collect(),
            }
        })
        .collect())
}

/// Checks whether the dynamics of `lp` can run over `g`: the communication
/// condition is checked, the knowledge and control conditions are reported
/// per agent.
pub fn validate_distributed(lp: &StandardFormLp, g: &CommGraph) -> ValidationReport {
    let mut report = ValidationReport::new();
    if g.n_agents() != lp.n() {
        report.error(format!(
            "graph has {} agents but the program has {} variables",
            g.n_agents(),
            lp.n()
        ));
        return report;
    }
    let roles = match agent_roles(&lp.a) {
        Ok(r) => r,
        Err(e) => {
            report.error(e.to_string());
            return report;
        }
    };
    if let Some((l, i, j)) = first_uncovered_pair(g, &lp.a) {
        report.error(format!(
            "violates (D3): agents {} and {} share constraint {} but are not neighbors",
            i + 1,
            j + 1,
            l + 1
        ));
    }
    report.info("(D2) each agent controls its own variable x_i");
    report.info("(D4) agents read the variables of their neighbors");
    let one_based = |v: &[usize]| v.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(",");
    for role in &roles {
        report.info(format!(
            "(D1) agent {} knows c_{}, b and rows {{{}}}; reads x {{{}}}; owns z {{{}}}",
            role.agent + 1,
            role.agent + 1,
            one_based(&role.rows),
            one_based(&role.reads_x),
            one_based(&role.owns_z),
        ));
    }
    report
}

/// Values last received over each link, refreshed at every breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StaleCache {
    pub x_snapshot: Vec<f64>,
    pub z_snapshot: Vec<f64>,
    pub snapshot_time: f64,
}

impl StaleCache {
    pub fn capture(s: &PrimalDualState, t: f64) -> Self {
        StaleCache {
            x_snapshot: s.x.clone(),
            z_snapshot: s.z.clone(),
            snapshot_time: t,
        }
    }
}

/// Raw (unprojected) x-flow and z-flow with stale reads across `failed` links.
fn rcg_flow(
    lp: &StandardFormLp,
    owners: &[usize],
    s: &PrimalDualState,
    cache: &StaleCache,
    failed: &BTreeSet<Edge>,
) -> (Vec<f64>, Vec<f64>) {
    if failed.is_empty() {
        return (nominal_flow(lp, s), constraint_residual(lp, &s.x));
    }
    let (n, m) = (lp.n(), lp.m());
    let down = |i: usize, j: usize| i != j && failed.contains(&edge(i, j));
    let mut fx = nominal_flow(lp, s);
    let mut view = vec![0.0; n];
    for i in 0..n {
        if !failed.iter().any(|&(a, b)| a == i || b == i) {
            continue;
        }
        for (j, v) in view.iter_mut().enumerate() {
            *v = if down(i, j) { cache.x_snapshot[j] } else { s.x[j] };
        }
        let mut acc = 0.0;
        for l in 0..m {
            let zl = if down(i, owners[l]) {
                cache.z_snapshot[l]
            } else {
                s.z[l]
            };
            let q = zl + (dot(lp.a.row(l), &view) - lp.b[l]);
            acc += lp.a[(l, i)] * q;
        }
        fx[i] = -lp.c[i] - acc;
    }
    let fz = (0..m)
        .map(|l| {
            let owner = owners[l];
            for (i, v) in view.iter_mut().enumerate() {
                *v = if down(i, owner) { cache.x_snapshot[i] } else { s.x[i] };
            }
            dot(lp.a.row(l), &view) - lp.b[l]
        })
        .collect();
    (fx, fz)
}

/// Projected velocity with stale information across failed links. Equals the
/// undisturbed projected velocity when `failed` is empty or the cache is fresh.
pub fn rcg_velocity(
    lp: &StandardFormLp,
    s: &PrimalDualState,
    cache: &StaleCache,
    failed: &BTreeSet<Edge>,
) -> Result<Velocity, NetworkError> {
    if let Some((index, &value)) = s.x.iter().enumerate().find(|(_, &v)| v < -crate::dynamics::NEGATIVE_TOL) {
        return Err(DynamicsError::NegativePrimal { index, value }.into());
    }
    let owners = z_owners(&lp.a)?;
    let (fx, fz) = rcg_flow(lp, &owners, s, cache, failed);
    Ok(Velocity {
        x: s.x.iter().zip(&fx).map(|(&xi, &f)| project(xi, f)).collect(),
        z: fz,
    })
}

/// Alternating failure/connected intervals: `[t_{2k}, t_{2k+1})` may lose
/// any base edges, `[t_{2k+1}, t_{2k+2})` has every base edge up. Before the
/// first breakpoint all links are up, and the schedule ends connected.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureSchedule {
    pub base_graph: CommGraph,
    pub breakpoints: Vec<f64>,
    /// `failing_edges[k]` is down on `[t_k, t_{k+1})`; empty for odd `k`.
    pub failing_edges: Vec<BTreeSet<Edge>>,
}

/// Which base edges go down in a disconnected interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailMode {
    All,
    /// Each edge fails independently with probability `p`.
    Random { p: f64, seed: u64 },
}

impl FailureSchedule {
    pub fn new(
        base_graph: CommGraph,
        breakpoints: Vec<f64>,
        failing_edges: Vec<BTreeSet<Edge>>,
    ) -> Result<Self, NetworkError> {
        let sched = FailureSchedule {
            base_graph,
            breakpoints,
            failing_edges,
        };
        sched.validate()?;
        Ok(sched)
    }

    /// No failures at all.
    pub fn never(base_graph: CommGraph) -> Self {
        FailureSchedule {
            base_graph,
            breakpoints: Vec::new(),
            failing_edges: Vec::new(),
        }
    }

    /// `cycles` repetitions of `disconnected` seconds of failures followed by
    /// `connected` seconds with every link up, starting at t = 0.
    pub fn periodic(
        base_graph: CommGraph,
        disconnected: f64,
        connected: f64,
        cycles: usize,
        mode: FailMode,
    ) -> Result<Self, NetworkError> {
        let mut breakpoints = Vec::with_capacity(2 * cycles);
        let mut failing = Vec::with_capacity(2 * cycles);
        let mut rng = match mode {
            FailMode::Random { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            FailMode::All => None,
        };
        let period = disconnected + connected;
        for k in 0..cycles {
            let start = k as f64 * period;
            breakpoints.push(start);
            breakpoints.push(start + disconnected);
            let down: BTreeSet<Edge> = match (mode, rng.as_mut()) {
                (FailMode::Random { p, .. }, Some(rng)) => base_graph
                    .edges()
                    .iter()
                    .copied()
                    .filter(|_| rng.gen::<f64>() < p)
                    .collect(),
                _ => base_graph.edges().clone(),
            };
            failing.push(down);
            failing.push(BTreeSet::new());
        }
        FailureSchedule::new(base_graph, breakpoints, failing)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |msg: String| Err(NetworkError::InvalidSchedule(msg));
        if self.failing_edges.len() != self.breakpoints.len() {
            return bad(format!(
                "{} breakpoints but {} interval edge sets",
                self.breakpoints.len(),
                self.failing_edges.len()
            ));
        }
        if self.breakpoints.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("breakpoints must be finite and nonnegative".into());
        }
        if self.breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return bad("breakpoints must be strictly increasing".into());
        }
        if self.breakpoints.len() % 2 == 1 {
            return bad("schedule must end with a connected interval (even number of breakpoints)".into());
        }
        for (k, set) in self.failing_edges.iter().enumerate() {
            if k % 2 == 1 && !set.is_empty() {
                return bad(format!("interval {k} is a connected interval but lists failing edges"));
            }
            if let Some(&(i, j)) = set.iter().find(|&&(i, j)| !self.base_graph.has_edge(i, j)) {
                return bad(format!("failing edge ({}, {}) is not a base edge", i + 1, j + 1));
            }
        }
        Ok(())
    }

    /// Longest disconnected interval.
    pub fn max_disconnected(&self) -> f64 {
        self.breakpoints
            .chunks(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Shortest connected interval between two disconnected ones.
    pub fn min_connected(&self) -> Option<f64> {
        self.breakpoints
            .windows(2)
            .enumerate()
            .filter(|(k, _)| k % 2 == 1)
            .map(|(_, w)| w[1] - w[0])
            .reduce(f64::min)
    }

    pub fn has_failures(&self) -> bool {
        self.failing_edges.iter().any(|s| !s.is_empty())
    }
}

/// Schedule file forms. Agent ids are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleJson {
    FailAll {
        breakpoints: Vec<f64>,
        fail_all: bool,
    },
    Explicit {
        breakpoints: Vec<f64>,
        failing: Vec<(usize, Vec<[usize; 2]>)>,
    },
    Periodic {
        periodic: PeriodicJson,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicJson {
    pub disconnected: f64,
    pub connected: f64,
    pub cycles: usize,
    #[serde(default)]
    pub fail_probability: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ScheduleJson {
    pub fn build(&self, base: &CommGraph) -> Result<FailureSchedule, NetworkError> {
        match self {
            ScheduleJson::FailAll {
                breakpoints,
                fail_all,
            } => {
                let failing = (0..breakpoints.len())
                    .map(|k| {
                        if *fail_all && k % 2 == 0 {
                            base.edges().clone()
                        } else {
                            BTreeSet::new()
                        }
                    })
                    .collect();
                FailureSchedule::new(base.clone(), breakpoints.clone(), failing)
            }
            ScheduleJson::Explicit {
                breakpoints,
                failing,
            } => {
                let mut sets = vec![BTreeSet::new(); breakpoints.len()];
                for (k, edges) in failing {
                    let slot = sets.get_mut(*k).ok_or_else(|| {
                        NetworkError::InvalidSchedule(format!("interval {k} out of range"))
                    })?;
                    for &[i, j] in edges {
                        if i == 0 || j == 0 {
                            return Err(NetworkError::InvalidSchedule(
                                "agent ids in JSON are 1-based".into(),
                            ));
                        }
                        slot.insert(edge(i - 1, j - 1));
                    }
                }
                FailureSchedule::new(base.clone(), breakpoints.clone(), sets)
            }
            ScheduleJson::Periodic { periodic: p } => {
                let mode = match p.fail_probability {
                    Some(prob) => FailMode::Random {
                        p: prob,
                        seed: p.seed,
                    },
                    None => FailMode::All,
                };
                FailureSchedule::periodic(base.clone(), p.disconnected, p.connected, p.cycles, mode)
            }
        }
    }
}

/// Residual (and distance, when a center is known) at a breakpoint that
/// opens a disconnected interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub interval: usize,
    pub time: f64,
    pub kkt: f64,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcgRun {
    pub trajectory: Trajectory,
    pub checkpoints: Vec<Checkpoint>,
}

impl RcgRun {
    pub fn checkpoint_residuals(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.kkt).collect()
    }
}

/// Euler integration of the stale-information dynamics over a failure schedule.
pub fn rcg_integrate(
    lp: &StandardFormLp,
    g: &CommGraph,
    sched: &FailureSchedule,
    s0: &PrimalDualState,
    cfg: &IntegratorConfig,
) -> Result<RcgRun, NetworkError> {
    let dist = DisturbanceSignal::zero(lp.n(), lp.m());
    rcg_integrate_with(Integrator::new(lp, *cfg), lp, g, sched, s0, &dist, None)
}

/// As [`rcg_integrate`], with a configured integrator, a disturbance added
/// to every agent's flow and an optional center for distance diagnostics.
pub fn rcg_integrate_with(
    integrator: Integrator<'_>,
    lp: &StandardFormLp,
    g: &CommGraph,
    sched: &FailureSchedule,
    s0: &PrimalDualState,
    dist: &DisturbanceSignal,
    center: Option<&PrimalDualState>,
) -> Result<RcgRun, NetworkError> {
    if g.n_agents() != lp.n() {
        return Err(NetworkError::InvalidGraph(format!(
            "graph has {} agents, program has {} variables",
            g.n_agents(),
            lp.n()
        )));
    }
    if let Some((l, i, j)) = first_uncovered_pair(g, &lp.a) {
        return Err(NetworkError::NotDistributed(format!(
            "agents {} and {} share row {} without an edge",
            i + 1,
            j + 1,
            l + 1
        )));
    }
    sched.validate()?;
    if sched.base_graph != *g {
        return Err(NetworkError::InvalidSchedule(
            "schedule base graph differs from the communication graph".into(),
        ));
    }
    let owners = z_owners(&lp.a)?;
    let dt = integrator.config().dt;
    let starts: Vec<usize> = sched
        .breakpoints
        .iter()
        .map(|t| (t / dt).round() as usize)
        .collect();
    let mut cache = StaleCache::capture(s0, 0.0);
    let mut interval: Option<usize> = None;
    let mut next = 0usize;
    let mut checkpoints = Vec::new();
    let no_failure = BTreeSet::new();

    let trajectory = integrator.run_with_flow(s0, dist, |k, t, s| {
        while next < starts.len() && starts[next] <= k {
            cache = StaleCache::capture(s, t);
            interval = Some(next);
            if next % 2 == 0 {
                checkpoints.push(Checkpoint {
                    interval: next,
                    time: t,
                    kkt: kkt_residual(lp, s),
                    distance: center.map(|c| s.distance(c)),
                });
            }
            next += 1;
        }
        let failed = interval.map_or(&no_failure, |i| &sched.failing_edges[i]);
        rcg_flow(lp, &owners, s, &cache, failed)
    })?;
    Ok(RcgRun {
        trajectory,
        checkpoints,
    })
}

/// Index from which `values` never increases again, treating entries at or
/// below `floor` as settled. `None` for an empty slice.
pub fn eventually_nonincreasing_from(values: &[f64], floor: f64) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut start = values.len() - 1;
    while start > 0 {
        let (a, b) = (values[start - 1], values[start]);
        if b <= a || (a <= floor && b <= floor) {
            start -= 1;
        } else {
            break;
        }
    }
    Some(start)
}

/// Whether `values[from..]` decreases strictly until it reaches `floor`.
pub fn strictly_decreasing_from(values: &[f64], from: usize, floor: f64) -> bool {
    values
        .get(from..)
        .unwrap_or(&[])
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= floor && w[1] <= floor))
}

/// Doubles the connected-interval length, starting from `initial`, until the
/// residuals at the failure onsets decrease strictly after the first
/// reconnection. Returns the first sufficient length, if any within `max_doublings`.
#[allow(clippy::too_many_arguments)]
pub fn find_sufficient_connected_interval(
    lp: &StandardFormLp,
    g: &CommGraph,
    s0: &PrimalDualState,
    disconnected: f64,
    initial: f64,
    cycles: usize,
    dt: f64,
    mode: FailMode,
    max_doublings: usize,
) -> Result<Option<f64>, NetworkError> {
    let mut connected = initial;
    for _ in 0..=max_doublings {
        let sched = FailureSchedule::periodic(g.clone(), disconnected, connected, cycles, mode)?;
        let cfg = IntegratorConfig {
            dt,
            t_max: cycles as f64 * (disconnected + connected),
            stop_tol: 0.0,
            record_every: usize::MAX,
        };
        let run = rcg_integrate(lp, g, &sched, s0, &cfg)?;
        let res = run.checkpoint_residuals();
        if strictly_decreasing_from(&res, 1, 1e-12) {
            return Ok(Some(connected));
        }
        connected *= 2.0;
    }
    Ok(None)
}
