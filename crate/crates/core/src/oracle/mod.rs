//! Exact ground truth for small programs.
//!
//! The primary route enumerates every `m`-subset of columns: a nonsingular
//! subset `B` with `A_B⁻¹b ≥ 0` is a vertex of the feasible set, the
//! cheapest vertices are the optimal ones, and `z = −A_B⁻ᵀc_B` on an optimal
//! basis is a dual vertex whenever it is dual feasible. Because every basis
//! is visited, the result lists all optimal bases and all vertices of the
//! dual solution set, not just one representative.
//!
//! Programs too large to enumerate can go through [`solve_simplex`], a dense
//! two-phase simplex with Bland's rule, or [`solve`], which picks a route.

mod simplex;

pub use simplex::solve_simplex;

use crate::linalg::{independent_rows, norm_inf, Lu, Matrix, PIVOT_TOL};
use crate::lp_model::{kkt_residual, PrimalDualState, StandardFormLp};
use serde::Serialize;

/// Default cap on the number of bases visited by one enumeration.
pub const DEFAULT_BUDGET: u128 = 2_000_000;

/// Tolerance used for primal/dual feasibility and cost ties.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded below")]
    Unbounded,
    #[error("basis enumeration needs {needed} bases, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("primal-dual solution set is unbounded")]
    UnboundedSolutionSet,
    #[error("invalid LP: {0}")]
    InvalidLp(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

/// Certified optimum of a small program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub x_star: Vec<f64>,
    pub z_star: Vec<f64>,
    pub optimal_value: f64,
    /// Optimal bases as sorted column index sets (0-based), lexicographic order.
    pub optimal_bases: Vec<Vec<usize>>,
    /// Distinct dual-feasible `z` obtained from the optimal bases.
    pub dual_vertices: Vec<Vec<f64>>,
    /// Distinct optimal primal vertices.
    pub primal_vertices: Vec<Vec<f64>>,
}

impl OracleSolution {
    pub fn state(&self) -> PrimalDualState {
        PrimalDualState::new(self.x_star.clone(), self.z_star.clone())
    }

    /// True when the primal-dual solution set is the single point returned.
    pub fn is_unique(&self, lp: &StandardFormLp) -> Result<bool, OracleError> {
        Ok(self.primal_vertices.len() == 1
            && self.dual_vertices.len() == 1
            && is_solution_set_bounded(lp, self)?)
    }
}

/// Number of `k`-subsets of an `n`-set, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic iterator over `k`-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Row-reduced copy of an LP: drops constraints that are linear
/// combinations of earlier ones, after checking they are consistent.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub lp: StandardFormLp,
    /// Indices of kept rows in the original program.
    pub rows: Vec<usize>,
    pub original_m: usize,
}

impl Reduced {
    pub fn new(lp: &StandardFormLp) -> Result<Reduced, OracleError> {
        let rows = independent_rows(&lp.a, PIVOT_TOL);
        if rows.len() < lp.m() {
            // A dependent row of A must stay dependent once b is appended.
            let mut aug = Vec::with_capacity(lp.m());
            for i in 0..lp.m() {
                let mut r = lp.a.row(i).to_vec();
                r.push(lp.b[i]);
                aug.push(r);
            }
            let aug = Matrix::from_rows(aug).expect("rectangular");
            if independent_rows(&aug, PIVOT_TOL).len() > rows.len() {
                return Err(OracleError::Infeasible);
            }
        }
        let reduced = StandardFormLp {
            name: lp.name.clone(),
            a: lp.a.select_rows(&rows),
            b: rows.iter().map(|&i| lp.b[i]).collect(),
            c: lp.c.clone(),
        };
        Ok(Reduced {
            lp: reduced,
            rows,
            original_m: lp.m(),
        })
    }

    pub fn is_full_rank(&self) -> bool {
        self.rows.len() == self.original_m
    }

    /// Lifts a dual vector of the reduced program back to all rows.
    pub fn lift_dual(&self, z: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.original_m];
        for (&i, &v) in self.rows.iter().zip(z) {
            full[i] = v;
        }
        full
    }
}

/// One feasible basis found during enumeration.
struct Vertex {
    basis: Vec<usize>,
    x: Vec<f64>,
    cost: f64,
    lu: Lu,
}

fn within_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= FEAS_TOL * (1.0 + a.abs().max(b.abs()))
}

fn push_distinct(set: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    let dup = set.iter().any(|w| {
        w.iter()
            .zip(&v)
            .all(|(a, b)| (a - b).abs() <= FEAS_TOL * (1.0 + a.abs().max(b.abs())))
    });
    if !dup {
        set.push(v);
    }
}

/// Enumerates the feasible bases of a full-row-rank program. Returns an
/// empty list when no basis is feasible.
fn feasible_vertices(lp: &StandardFormLp, budget: u128) -> Result<Vec<Vertex>, OracleError> {
    let (m, n) = (lp.m(), lp.n());
    let needed = binomial(n, m);
    if needed > budget {
        return Err(OracleError::BudgetExceeded { needed, budget });
    }
    let scale = 1.0 + norm_inf(&lp.b);
    let mut out = Vec::new();
    for basis in Combinations::new(n, m) {
        let ab = lp.a.select_columns(&basis);
        let Some(lu) = Lu::factor(&ab) else { continue };
        let xb = lu.solve(&lp.b);
        if xb.iter().any(|&v| v < -FEAS_TOL * scale || !v.is_finite()) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&j, &v) in basis.iter().zip(&xb) {
            x[j] = v.max(0.0);
        }
        let cost = lp.objective(&x);
        out.push(Vertex { basis, x, cost, lu });
    }
    Ok(out)
}

/// Minimizes a program whose feasible set is known to be bounded (or whose
/// cost is zero). `None` means infeasible.
fn solve_bounded(lp: &StandardFormLp, budget: u128) -> Result<Option<(f64, Vec<f64>)>, OracleError> {
    let reduced = match Reduced::new(lp) {
        Ok(r) => r,
        Err(OracleError::Infeasible) => return Ok(None),
        Err(e) => return Err(e),
    };
    let vertices = feasible_vertices(&reduced.lp, budget)?;
    Ok(vertices
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .map(|v| (v.cost, v.x)))
}

/// Minimum of `cᵀd` over normalized recession directions
/// `{d ≥ 0, Ad = 0, 𝟙ᵀd = 1}`; `None` when the feasible set is bounded.
pub(crate) fn min_recession_cost(
    lp: &StandardFormLp,
    budget: u128,
) -> Result<Option<(f64, Vec<f64>)>, OracleError> {
    let n = lp.n();
    let mut rows = lp.a.to_rows();
    rows.push(vec![1.0; n]);
    let mut b = vec![0.0; lp.m()];
    b.push(1.0);
    let aux = StandardFormLp {
        name: "recession".into(),
        a: Matrix::from_rows(rows).expect("rectangular"),
        b,
        c: lp.c.clone(),
    };
    solve_bounded(&aux, budget)
}

/// Enumerates bases of `lp` and returns a certified optimum together with
/// every optimal basis. Uses [`DEFAULT_BUDGET`].
pub fn solve_primal_dual(lp: &StandardFormLp) -> Result<OracleSolution, OracleError> {
    solve_primal_dual_with_budget(lp, DEFAULT_BUDGET)
}

pub fn solve_primal_dual_with_budget(
    lp: &StandardFormLp,
    budget: u128,
) -> Result<OracleSolution, OracleError> {
    lp.ensure_valid()
        .map_err(|e| OracleError::InvalidLp(e.to_string()))?;
    let reduced = Reduced::new(lp)?;
    let rlp = &reduced.lp;
    let vertices = feasible_vertices(rlp, budget)?;
    if vertices.is_empty() {
        // A nonempty standard-form polyhedron with full row rank has a
        // vertex, so no feasible basis means no feasible point.
        return Err(OracleError::Infeasible);
    }
    if let Some((cost, _)) = min_recession_cost(rlp, budget)? {
        if cost < -FEAS_TOL {
            return Err(OracleError::Unbounded);
        }
    }

    let best = vertices
        .iter()
        .map(|v| v.cost)
        .fold(f64::INFINITY, f64::min);
    let mut optimal_bases = Vec::new();
    let mut dual_vertices = Vec::new();
    let mut primal_vertices = Vec::new();
    let mut chosen: Option<(Vec<f64>, Vec<f64>)> = None;
    let slack_scale = 1.0 + norm_inf(&rlp.c);
    for v in vertices.iter().filter(|v| within_tie(v.cost, best)) {
        optimal_bases.push(v.basis.clone());
        push_distinct(&mut primal_vertices, v.x.clone());
        let cb: Vec<f64> = v.basis.iter().map(|&j| rlp.c[j]).collect();
        let z: Vec<f64> = v.lu.solve_transpose(&cb).into_iter().map(|t| -t).collect();
        let slack = rlp.dual_slack(&z);
        if slack.iter().all(|&s| s >= -FEAS_TOL * slack_scale) {
            let z = reduced.lift_dual(&z);
            if chosen.is_none() {
                chosen = Some((v.x.clone(), z.clone()));
            }
            push_distinct(&mut dual_vertices, z);
        }
    }
    let Some((x_star, z_star)) = chosen else {
        return Err(OracleError::Numerical(
            "no optimal basis is dual feasible".into(),
        ));
    };
    let sol = OracleSolution {
        optimal_value: lp.objective(&x_star),
        x_star,
        z_star,
        optimal_bases,
        dual_vertices,
        primal_vertices,
    };
    let residual = kkt_residual(lp, &sol.state());
    let scale = 1.0 + lp.a.max_abs() + norm_inf(&lp.b) + norm_inf(&lp.c);
    if residual > FEAS_TOL * scale {
        return Err(OracleError::Numerical(format!(
            "certificate residual {residual:e} too large"
        )));
    }
    Ok(sol)
}

/// Enumeration when the basis count fits in [`DEFAULT_BUDGET`], simplex otherwise.
pub fn solve(lp: &StandardFormLp) -> Result<OracleSolution, OracleError> {
    match solve_primal_dual(lp) {
        Err(OracleError::BudgetExceeded { .. }) => solve_simplex(lp),
        other => other,
    }
}

/// Whether both the primal and the dual optimal faces are bounded.
///
/// Primal face: a nonzero recession direction `d ≥ 0, Ad = 0` with `cᵀd = 0`
/// keeps optimality. Dual face: a nonzero `e` with `Aᵀe ≥ 0, bᵀe = 0` keeps
/// dual feasibility and the dual objective; rank-deficient `A` always admits
/// one through the null space of `Aᵀ`.
pub fn is_solution_set_bounded(
    lp: &StandardFormLp,
    _sol: &OracleSolution,
) -> Result<bool, OracleError> {
    is_solution_set_bounded_with_budget(lp, DEFAULT_BUDGET)
}

pub fn is_solution_set_bounded_with_budget(
    lp: &StandardFormLp,
    budget: u128,
) -> Result<bool, OracleError> {
    let reduced = Reduced::new(lp)?;
    if !reduced.is_full_rank() {
        return Ok(false);
    }
    let rlp = &reduced.lp;
    if let Some((cost, _)) = min_recession_cost(rlp, budget)? {
        if cost <= FEAS_TOL {
            return Ok(false);
        }
    }
    Ok(!dual_face_has_ray(rlp, budget)?)
}

/// Feasibility of `{Aᵀ(e⁺ − e⁻) − s = 0, bᵀ(e⁺ − e⁻) = 0, 𝟙ᵀs = 1, e±, s ≥ 0}`.
fn dual_face_has_ray(lp: &StandardFormLp, budget: u128) -> Result<bool, OracleError> {
    let (m, n) = (lp.m(), lp.n());
    let cols = 2 * m + n;
    let mut rows = Vec::with_capacity(n + 2);
    for j in 0..n {
        let mut r = vec![0.0; cols];
        for l in 0..m {
            r[l] = lp.a[(l, j)];
            r[m + l] = -lp.a[(l, j)];
        }
        r[2 * m + j] = -1.0;
        rows.push(r);
    }
    let mut r = vec![0.0; cols];
    for l in 0..m {
        r[l] = lp.b[l];
        r[m + l] = -lp.b[l];
    }
    rows.push(r);
    let mut r = vec![0.0; cols];
    for j in 0..n {
        r[2 * m + j] = 1.0;
    }
    rows.push(r);
    let mut b = vec![0.0; n + 1];
    b.push(1.0);
    let aux = StandardFormLp {
        name: "dual-ray".into(),
        a: Matrix::from_rows(rows).expect("rectangular"),
        b,
        c: vec![0.0; cols],
    };
    Ok(solve_bounded(&aux, budget)?.is_some())
}

/// A valid penalty constant for the exact-penalty Lagrangian: the largest
/// `‖Aᵀz + c‖∞` over the enumerated dual vertices and `z_star`.
///
/// This ignores the restriction to a Lyapunov sublevel set, so it bounds the
/// sharp value from above for every `rho`.
pub fn compute_k_star(
    lp: &StandardFormLp,
    sol: &OracleSolution,
    _rho: f64,
) -> Result<f64, OracleError> {
    if !is_solution_set_bounded(lp, sol)? {
        return Err(OracleError::UnboundedSolutionSet);
    }
    Ok(vertex_slack_bound(lp, sol))
}

/// `max ‖Aᵀz + c‖∞` over the recorded dual vertices and `z_star`, without
/// the boundedness check of [`compute_k_star`].
pub fn vertex_slack_bound(lp: &StandardFormLp, sol: &OracleSolution) -> f64 {
    sol.dual_vertices
        .iter()
        .chain(std::iter::once(&sol.z_star))
        .map(|z| norm_inf(&lp.dual_slack(z)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp_model::lp1;

    fn lp(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> StandardFormLp {
        StandardFormLp::new("t", a, b, c).unwrap()
    }

    /// `min x₁ s.t. x₁ − x₂ = 0`; dual set is the segment [−1, 0].
    fn ray_lp() -> StandardFormLp {
        lp(vec![vec![1.0, -1.0]], vec![0.0], vec![1.0, 0.0])
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[5], vec![2, 3]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(binomial(240, 60) > DEFAULT_BUDGET, true);
        assert_eq!(binomial(6, 3), 20);
    }

    #[test]
    fn lp1_solution() {
        let sol = solve_primal_dual(&lp1()).unwrap();
        assert_eq!(sol.x_star, vec![1.0, 0.0]);
        assert_eq!(sol.z_star, vec![-1.0]);
        assert_eq!(sol.optimal_value, 1.0);
        assert_eq!(sol.optimal_bases, vec![vec![0]]);
        assert!(sol.is_unique(&lp1()).unwrap());
    }

    #[test]
    fn tied_vertices_reported() {
        let p = lp(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0]);
        let sol = solve_primal_dual(&p).unwrap();
        assert_eq!(sol.optimal_value, 1.0);
        assert_eq!(sol.optimal_bases, vec![vec![0], vec![1]]);
        assert_eq!(sol.primal_vertices.len(), 2);
        assert_eq!(sol.dual_vertices, vec![vec![-1.0]]);
        assert!(is_solution_set_bounded(&p, &sol).unwrap());
        assert!(!sol.is_unique(&p).unwrap());
    }

    #[test]
    fn infeasible_detected() {
        let p = lp(vec![vec![1.0]], vec![-1.0], vec![1.0]);
        assert_eq!(solve_primal_dual(&p), Err(OracleError::Infeasible));
        // inconsistent duplicate rows
        let p = lp(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 2.0], vec![1.0, 1.0]);
        assert_eq!(solve_primal_dual(&p), Err(OracleError::Infeasible));
    }

    #[test]
    fn unbounded_detected() {
        // x₁ − x₂ = 0 with cost −x₁ decreases forever along (1, 1)
        let p = lp(vec![vec![1.0, -1.0]], vec![0.0], vec![-1.0, 0.0]);
        assert_eq!(solve_primal_dual(&p), Err(OracleError::Unbounded));
    }

    #[test]
    fn budget_respected() {
        let err = solve_primal_dual_with_budget(&lp1(), 1).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { needed: 2, budget: 1 }));
    }

    #[test]
    fn redundant_rows_dropped_and_dual_lifted() {
        let p = lp(
            vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 2.0],
            vec![1.0, 2.0],
        );
        let sol = solve_primal_dual(&p).unwrap();
        assert_eq!(sol.optimal_value, 1.0);
        assert_eq!(sol.z_star.len(), 2);
        assert!(kkt_residual(&p, &sol.state()) <= 1e-12);
        // rank-deficient rows leave the dual solution set unbounded
        assert!(!is_solution_set_bounded(&p, &sol).unwrap());
    }

    #[test]
    fn k_star_examples() {
        let p = lp1();
        let sol = solve_primal_dual(&p).unwrap();
        assert_eq!(compute_k_star(&p, &sol, 0.5).unwrap(), 1.0);
        assert_eq!(compute_k_star(&p, &sol, 100.0).unwrap(), 1.0);

        // min x₁ s.t. x₁ − 2x₂ = 0: dual vertices z = −1 and z = 0 give
        // slacks (0, 2) and (1, 0).
        let p = lp(vec![vec![1.0, -2.0]], vec![0.0], vec![1.0, 0.0]);
        let sol = solve_primal_dual(&p).unwrap();
        let mut zs: Vec<f64> = sol.dual_vertices.iter().map(|z| z[0]).collect();
        zs.sort_by(f64::total_cmp);
        assert_eq!(zs, vec![-1.0, 0.0]);
        assert_eq!(compute_k_star(&p, &sol, 1.0).unwrap(), 2.0);

        // c = 0, b = 0: z = 0 is a vertex and the slack vanishes, but the
        // dual face {z ≥ 0} is a cone, so the checked variant refuses.
        let p = lp(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], vec![0.0, 0.0]);
        let sol = solve_primal_dual(&p).unwrap();
        assert_eq!(sol.z_star, vec![0.0, 0.0]);
        assert_eq!(vertex_slack_bound(&p, &sol), 0.0);
        assert_eq!(
            compute_k_star(&p, &sol, 1.0),
            Err(OracleError::UnboundedSolutionSet)
        );
    }

    #[test]
    fn boundedness_examples() {
        let p = lp1();
        let sol = solve_primal_dual(&p).unwrap();
        assert!(is_solution_set_bounded(&p, &sol).unwrap());

        let p = ray_lp();
        let sol = solve_primal_dual(&p).unwrap();
        assert_eq!(sol.optimal_value, 0.0);
        assert_eq!(sol.x_star, vec![0.0, 0.0]);
        assert!(is_solution_set_bounded(&p, &sol).unwrap());
        assert_eq!(sol.dual_vertices.len(), 2);

        // min 0 over the ray {x₁ = x₂}: primal face is the whole ray
        let p = lp(vec![vec![1.0, -1.0]], vec![0.0], vec![0.0, 0.0]);
        let sol = solve_primal_dual(&p).unwrap();
        assert!(!is_solution_set_bounded(&p, &sol).unwrap());
        assert_eq!(
            compute_k_star(&p, &sol, 1.0),
            Err(OracleError::UnboundedSolutionSet)
        );

        // min x₁ + x₂ s.t. x₁ + x₂ = 0 ... feasible set is {0}; dual
        // z ≥ −1 with objective 0 everywhere is an unbounded ray
        let p = lp(vec![vec![1.0, 1.0]], vec![0.0], vec![1.0, 1.0]);
        let sol = solve_primal_dual(&p).unwrap();
        assert!(!is_solution_set_bounded(&p, &sol).unwrap());
    }
}
